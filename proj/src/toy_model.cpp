#include "hamr/toy_model.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "hamr/errors.hpp"

namespace hamr {

namespace {

constexpr std::array<double, kNumFingertips> kRadiusFactor{1.15, 1.0, 1.02, 0.95, 0.85};
constexpr std::array<double, 4> kKnuckleSpread{-0.375, -0.125, 0.125, 0.375};
constexpr std::array<double, 4> kFingerSplay{-0.08, 0.0, 0.06, 0.14};

struct FingerLayout {
  Eigen::Vector3d base;
  Eigen::Vector3d dir;
  Eigen::Vector3d side;
  Eigen::Vector3d normal;
  std::array<double, 3> lengths;
  double radius;

  [[nodiscard]] double total() const { return lengths[0] + lengths[1] + lengths[2]; }
  [[nodiscard]] double boundary(int j) const {
    double s = 0.0;
    for (int i = 0; i < j; ++i) s += lengths[i];
    return s;
  }
};

void check_config(const ToyHandConfig& c) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(c.palm_width) || !positive(c.palm_length) || !positive(c.palm_thickness) ||
      !positive(c.finger_radius)) {
    throw InvalidArgument("build_toy_model: palm and radius dimensions must be positive");
  }
  for (const auto& finger : c.segment_lengths)
    for (double l : finger)
      if (!positive(l)) throw InvalidArgument("build_toy_model: segment lengths must be positive");
  if (c.ring_resolution < 3) throw InvalidArgument("build_toy_model: ring_resolution must be >= 3");
  if (c.rings_per_segment < 1) throw InvalidArgument("build_toy_model: rings_per_segment must be >= 1");
  if (c.finger_radius >= 0.5 * c.palm_width) {
    throw InvalidArgument("build_toy_model: finger radius too large for the palm");
  }
}

std::array<FingerLayout, kNumFingertips> finger_layout(const ToyHandConfig& c) {
  const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  std::array<FingerLayout, kNumFingertips> fingers;
  fingers[0].base = {-0.30 * c.palm_width, 0.28 * c.palm_length, 0.0};
  fingers[0].dir = Eigen::Vector3d(-0.75, 1.0, 0.0).normalized();
  for (int f = 1; f < kNumFingertips; ++f) {
    fingers[f].base = {kKnuckleSpread[f - 1] * c.palm_width, c.palm_length, 0.0};
    fingers[f].dir = Eigen::Vector3d(kFingerSplay[f - 1], 1.0, 0.0).normalized();
  }
  for (int f = 0; f < kNumFingertips; ++f) {
    auto& finger = fingers[f];
    finger.side = finger.dir.cross(up).normalized();
    finger.normal = up;
    finger.lengths = c.segment_lengths[f];
    finger.radius = kRadiusFactor[f] * c.finger_radius;
  }
  return fingers;
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Platform-independent uniform draw in [0, 1).
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int finger_joint(int finger, int segment) { return 1 + 3 * finger + segment; }

// Mesh under construction plus the per-vertex data the bases need.
struct Builder {
  std::vector<Eigen::Vector3d> positions;
  std::vector<int> part;              // -1 palm, else finger index
  std::vector<double> axial;          // distance along the finger axis from its base
  std::vector<Eigen::Vector3d> radial;
  std::vector<Eigen::Vector3i> faces;

  int add(const Eigen::Vector3d& p, int owner, double s, const Eigen::Vector3d& r) {
    positions.push_back(p);
    part.push_back(owner);
    axial.push_back(s);
    radial.push_back(r);
    return static_cast<int>(positions.size()) - 1;
  }

  // Quads between consecutive rings, fans to the two cap centres. Winding is
  // outward given rings that turn clockwise about the tube direction.
  void stitch(const std::vector<int>& ring_starts, int resolution, int start_cap, int end_cap) {
    for (std::size_t q = 0; q + 1 < ring_starts.size(); ++q) {
      const int a = ring_starts[q];
      const int b = ring_starts[q + 1];
      for (int j = 0; j < resolution; ++j) {
        const int jn = (j + 1) % resolution;
        faces.emplace_back(a + j, b + j, a + jn);
        faces.emplace_back(a + jn, b + j, b + jn);
      }
    }
    const int first = ring_starts.front();
    const int last = ring_starts.back();
    for (int j = 0; j < resolution; ++j) {
      const int jn = (j + 1) % resolution;
      faces.emplace_back(start_cap, first + j, first + jn);
      faces.emplace_back(end_cap, last + jn, last + j);
    }
  }
};

}  // namespace

JointPositions toy_skeleton(const ToyHandConfig& config) {
  check_config(config);
  const auto fingers = finger_layout(config);
  JointPositions joints = JointPositions::Zero(kNumModelJoints, 3);
  for (int f = 0; f < kNumFingertips; ++f) {
    for (int j = 0; j < 3; ++j) {
      joints.row(finger_joint(f, j)) = (fingers[f].base + fingers[f].boundary(j) * fingers[f].dir).transpose();
    }
  }
  return joints;
}

HandModel build_toy_model(const ToyHandConfig& config) {
  check_config(config);
  const auto fingers = finger_layout(config);
  const int res = config.ring_resolution;
  const int palm_res = 2 * res;
  const int rps = config.rings_per_segment;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  Builder mesh;
  // Ring start index of the ring centred on each joint.
  std::array<int, kNumModelJoints> joint_ring{};

  // Palm: elliptic tube from the wrist to the knuckle line.
  {
    const double hw = 0.5 * config.palm_width;
    const double ht = 0.5 * config.palm_thickness;
    std::vector<int> rings;
    constexpr int kPalmStations = 5;
    for (int q = 0; q < kPalmStations; ++q) {
      const double y = config.palm_length * q / (kPalmStations - 1);
      rings.push_back(static_cast<int>(mesh.positions.size()));
      for (int j = 0; j < palm_res; ++j) {
        const double a = kTwoPi * j / palm_res;
        const Eigen::Vector3d offset(hw * std::cos(a), 0.0, ht * std::sin(a));
        mesh.add(Eigen::Vector3d(0.0, y, 0.0) + offset, -1, 0.0, offset);
      }
    }
    joint_ring[0] = rings.front();
    const int bottom = mesh.add(Eigen::Vector3d::Zero(), -1, 0.0, Eigen::Vector3d::Zero());
    const int top = mesh.add(Eigen::Vector3d(0.0, config.palm_length, 0.0), -1, 0.0, Eigen::Vector3d::Zero());
    mesh.stitch(rings, palm_res, bottom, top);
  }

  std::array<int, kNumFingertips> tips{};
  for (int f = 0; f < kNumFingertips; ++f) {
    const auto& finger = fingers[f];
    const double total = finger.total();
    auto radius_at = [&](double s) { return finger.radius * (1.0 - 0.2 * s / total); };
    auto add_ring = [&](double s, double radius) {
      const int start = static_cast<int>(mesh.positions.size());
      const Eigen::Vector3d centre = finger.base + s * finger.dir;
      for (int j = 0; j < res; ++j) {
        const double a = kTwoPi * j / res;
        const Eigen::Vector3d offset = radius * (std::cos(a) * finger.side + std::sin(a) * finger.normal);
        mesh.add(centre + offset, f, s, offset);
      }
      return start;
    };

    std::vector<int> rings;
    double last_station = 0.0;
    for (int j = 0; j < 3; ++j) {
      for (int q = 0; q < rps; ++q) {
        const double s = finger.boundary(j) + finger.lengths[j] * q / rps;
        const int start = add_ring(s, radius_at(s));
        if (q == 0) joint_ring[finger_joint(f, j)] = start;
        rings.push_back(start);
        last_station = s;
      }
    }
    const double tip_ring_s = last_station + 0.6 * (total - last_station);
    rings.push_back(add_ring(tip_ring_s, 0.75 * radius_at(tip_ring_s)));

    const double base_s = -0.5 * finger.radius;
    const int base_cap = mesh.add(finger.base + base_s * finger.dir, f, base_s, Eigen::Vector3d::Zero());
    tips[f] = mesh.add(finger.base + total * finger.dir, f, total, Eigen::Vector3d::Zero());
    mesh.stitch(rings, res, base_cap, tips[f]);
  }

  const int n = static_cast<int>(mesh.positions.size());
  HandModel model;
  model.name = "toy-hand";
  model.template_vertices.resize(n, 3);
  for (int i = 0; i < n; ++i) model.template_vertices.row(i) = mesh.positions[i].transpose();
  model.faces.resize(static_cast<int>(mesh.faces.size()), 3);
  for (int i = 0; i < model.faces.rows(); ++i) model.faces.row(i) = mesh.faces[i].transpose();

  model.joint_parents.assign(kNumModelJoints, -1);
  for (int f = 0; f < kNumFingertips; ++f) {
    model.joint_parents[finger_joint(f, 0)] = 0;
    model.joint_parents[finger_joint(f, 1)] = finger_joint(f, 0);
    model.joint_parents[finger_joint(f, 2)] = finger_joint(f, 1);
  }

  // Skinning: each finger vertex blends its segment bone with the neighbours
  // through smoothsteps centred on the joint boundaries.
  model.skinning_weights = Eigen::MatrixXd::Zero(n, kNumModelJoints);
  for (int i = 0; i < n; ++i) {
    const int f = mesh.part[i];
    if (f < 0) {
      model.skinning_weights(i, 0) = 1.0;
      continue;
    }
    const auto& finger = fingers[f];
    std::array<double, 3> ramp{};
    for (int j = 0; j < 3; ++j) {
      const double shorter = j == 0 ? finger.lengths[0] : std::min(finger.lengths[j - 1], finger.lengths[j]);
      const double half = 0.4 * shorter;
      ramp[j] = smoothstep((mesh.axial[i] - finger.boundary(j) + half) / (2.0 * half));
    }
    model.skinning_weights(i, 0) = 1.0 - ramp[0];
    model.skinning_weights(i, finger_joint(f, 0)) = ramp[0] - ramp[1];
    model.skinning_weights(i, finger_joint(f, 1)) = ramp[1] - ramp[2];
    model.skinning_weights(i, finger_joint(f, 2)) = ramp[2];
  }

  model.joint_regressor = Eigen::MatrixXd::Zero(n, kNumModelJoints);
  for (int k = 0; k < kNumModelJoints; ++k) {
    const int ring_size = k == 0 ? palm_res : res;
    for (int j = 0; j < ring_size; ++j) model.joint_regressor(joint_ring[k] + j, k) = 1.0 / ring_size;
  }

  model.shape_basis = Eigen::MatrixXd::Zero(3 * n, kNumShape);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d& p = mesh.positions[i];
    const int f = mesh.part[i];
    auto set = [&](int component, const Eigen::Vector3d& delta) {
      model.shape_basis.block<3, 1>(3 * i, component) = delta;
    };
    set(0, kToyScaleStep * p);
    if (f < 0) {
      set(6, Eigen::Vector3d(kToyPalmWidthStep * p.x(), 0.0, 0.0));
      set(7, Eigen::Vector3d(0.0, kToyPalmLengthStep * p.y(), 0.0));
      set(8, Eigen::Vector3d(0.0, 0.0, kToyPalmThicknessStep * p.z()));
    } else {
      const auto& finger = fingers[f];
      set(1 + f, kToyFingerLengthStep * std::max(mesh.axial[i], 0.0) * finger.dir);
      set(6, Eigen::Vector3d(kToyPalmWidthStep * finger.base.x(), 0.0, 0.0));
      set(7, Eigen::Vector3d(0.0, kToyPalmLengthStep * finger.base.y(), 0.0));
      set(9, kToyFingerRadiusStep * mesh.radial[i]);
    }
  }

  // Pose correctives: joint rings bulge as the joint's rotation leaves rest.
  std::mt19937_64 rng(config.seed);
  model.pose_basis = Eigen::MatrixXd::Zero(3 * n, 9 * (kNumModelJoints - 1));
  for (int k = 1; k < kNumModelJoints; ++k) {
    const double amplitude = 0.1 + 0.1 * uniform01(rng);
    for (int j = 0; j < res; ++j) {
      const int v = joint_ring[k] + j;
      for (int diag : {0, 4, 8}) {
        model.pose_basis.block<3, 1>(3 * v, 9 * (k - 1) + diag) = -amplitude * mesh.radial[v];
      }
    }
  }

  model.rest_pose = JointPositions::Zero(kNumModelJoints, 3);
  model.fingertip_vertex_ids = tips;
  for (int c = 0; c < kNumChains; ++c) {
    const int f = c + 1;
    model.finger_chains[c] = {kNumModelJoints + f, finger_joint(f, 2), finger_joint(f, 1), finger_joint(f, 0)};
  }
  for (int k = 1; k < kNumModelJoints; ++k) model.skeleton_edges.emplace_back(k, model.joint_parents[k]);
  for (int f = 0; f < kNumFingertips; ++f) model.skeleton_edges.emplace_back(kNumModelJoints + f, finger_joint(f, 2));
  return model;
}

}  // namespace hamr
