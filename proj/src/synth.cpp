#include "hamr/synth.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <random>

#include "hamr/errors.hpp"

namespace hamr {

namespace {

class Uniform {
 public:
  Uniform(std::uint64_t seed, int index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    rng_.seed(seq);
  }
  double operator()(double lo, double hi) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

 private:
  std::mt19937_64 rng_;
};

Eigen::Vector3d log_rotation(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

std::vector<Eigen::Matrix3d> rest_globals(const HandModel& model) {
  std::vector<Eigen::Matrix3d> out(model.num_joints());
  for (int k : topological_order(model.joint_parents)) {
    const Eigen::Matrix3d local = rodrigues(model.rest_pose.row(k).transpose());
    const int p = model.joint_parents[k];
    out[k] = p < 0 ? local : Eigen::Matrix3d(out[p] * local);
  }
  return out;
}

Eigen::Vector3d palm_normal(const HandModel& model, const Joints3D& rest) {
  Eigen::Matrix<double, kNumChains + 1, 3> pts;
  pts.row(0) = rest.points.row(0);
  for (int c = 0; c < kNumChains; ++c) pts.row(c + 1) = rest.points.row(model.finger_chains[c][3]);
  const Eigen::RowVector3d mean = pts.colwise().mean();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd((pts.rowwise() - mean).eval(), Eigen::ComputeFullV);
  Eigen::Vector3d n = svd.matrixV().col(2);
  if (n.z() < 0.0) n = -n;
  return n;
}

}  // namespace

void SynthConfig::validate() const {
  if (!(perturbation >= 0.0) || !(shape_range >= 0.0)) throw InvalidArgument("synth: ranges must be >= 0");
  if (image_size.height <= 0 || image_size.width <= 0) throw InvalidArgument("synth: image size must be positive");
  if (!(fill > 0.0)) throw InvalidArgument("synth: fill must be positive");
}

std::string synth_id(std::uint64_t seed, int index) {
  return "synth-" + std::to_string(seed) + "-" + std::to_string(index);
}

SynthSample synthesize(const HandModel& model, std::uint64_t seed, int index, const SynthConfig& config) {
  config.validate();
  Uniform draw(seed, index);
  const double p = config.perturbation;
  const int k_count = model.num_joints();

  ParamState truth;
  for (int i = 0; i < kNumShape; ++i) truth.beta.beta[i] = draw(-config.shape_range, config.shape_range);
  truth.theta.theta = model.rest_pose;

  std::vector<int> hinge_of(k_count, -1);  // chain index for flexing joints
  for (int c = 0; c < kNumChains; ++c) {
    hinge_of[model.finger_chains[c][1]] = c;
    hinge_of[model.finger_chains[c][2]] = c;
  }
  const Joints3D rest = regress_joints(model, model.template_vertices);
  const Eigen::Vector3d normal = palm_normal(model, rest);
  const auto globals = rest_globals(model);

  for (int k = 0; k < k_count; ++k) {
    if (hinge_of[k] < 0) {
      for (int c = 0; c < 3; ++c) truth.theta.theta(k, c) += draw(-p, p);
      continue;
    }
    const FingerChain& chain = model.finger_chains[hinge_of[k]];
    const Eigen::Vector3d dir = (rest.points.row(chain[0]) - rest.points.row(chain[3])).transpose().normalized();
    const Eigen::Vector3d hinge = dir.cross(normal).normalized();
    const double angle = draw(0.0, p);
    // Rotation about the rest-space hinge, expressed in the joint's local frame.
    const int parent = model.joint_parents[k];
    const Eigen::Matrix3d frame = parent < 0 ? Eigen::Matrix3d::Identity() : globals[parent];
    const Eigen::Matrix3d local = frame.transpose() * Eigen::AngleAxisd(angle, hinge).toRotationMatrix() * frame *
                                  rodrigues(model.rest_pose.row(k).transpose());
    truth.theta.theta.row(k) = log_rotation(local).transpose();
  }

  SynthSample out;
  out.mesh = lbs_forward(model, truth.beta, truth.theta);
  const auto& v = out.mesh.vertices;
  const Eigen::Vector2d lo(v.col(0).minCoeff(), v.col(1).minCoeff());
  const Eigen::Vector2d hi(v.col(0).maxCoeff(), v.col(1).maxCoeff());
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0)) throw DegenerateInput("synth: posed mesh has zero extent");
  const ImageSize size = config.image_size;
  truth.cam.s = config.fill * std::min(size.height, size.width) / extent;
  truth.cam.tx = 0.5 * size.width / truth.cam.s - 0.5 * (lo.x() + hi.x());
  truth.cam.ty = 0.5 * size.height / truth.cam.s - 0.5 * (lo.y() + hi.y());
  out.truth = truth;

  Sample& s = out.sample;
  s.id = synth_id(seed, index);
  s.image_size = size;
  s.joints3d = regress_joints(model, out.mesh);
  s.keypoints2d = project(*s.joints3d, truth.cam);
  s.mask = rasterize_mask(out.mesh, truth.cam, size);
  s.gt_cam = camera_from_pairs(*s.joints3d, *s.keypoints2d, model.skeleton_edges);
  return out;
}

}  // namespace hamr
