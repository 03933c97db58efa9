#include "hamr/losses.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <string>

#include "hamr/errors.hpp"

namespace hamr {

namespace {

void check_counts(const Eigen::Ref<const RowMatrixXd>& pred, const Eigen::Ref<const RowMatrixXd>& gt,
                  std::span<const bool> mask) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols() || static_cast<Eigen::Index>(mask.size()) != pred.rows()) {
    throw InvalidArgument("loss_keypoints: point count mismatch");
  }
}

struct ChainVectors {
  Eigen::Vector3d ab, bc, cd;
};

ChainVectors chain_vectors(const Joints3D& joints, const FingerChain& chain) {
  const Eigen::Vector3d a = joints.points.row(chain[0]).transpose();
  const Eigen::Vector3d b = joints.points.row(chain[1]).transpose();
  const Eigen::Vector3d c = joints.points.row(chain[2]).transpose();
  const Eigen::Vector3d d = joints.points.row(chain[3]).transpose();
  return {a - b, b - c, c - d};
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {lambda_3d, lambda_2d, lambda_geo, lambda_cam, lambda_ht, lambda_seg}) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidArgument("loss weights must be finite and nonnegative");
  }
}

double loss_keypoints(const Eigen::Ref<const RowMatrixXd>& pred, const Eigen::Ref<const RowMatrixXd>& gt,
                      std::span<const bool> mask) {
  check_counts(pred, gt, mask);
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index k = 0; k < pred.rows(); ++k) {
    if (!mask[k]) continue;
    sum += (pred.row(k) - gt.row(k)).squaredNorm();
    ++count;
  }
  return count == 0 ? 0.0 : sum / count;
}

double loss_keypoints(const Eigen::Ref<const RowMatrixXd>& pred, const Eigen::Ref<const RowMatrixXd>& gt,
                      std::span<const bool> mask, Eigen::Ref<RowMatrixXd> grad) {
  check_counts(pred, gt, mask);
  if (grad.rows() != pred.rows() || grad.cols() != pred.cols()) {
    throw InvalidArgument("loss_keypoints: gradient shape mismatch");
  }
  int count = 0;
  for (bool m : mask) count += m ? 1 : 0;
  grad.setZero();
  if (count == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index k = 0; k < pred.rows(); ++k) {
    if (!mask[k]) continue;
    const auto diff = pred.row(k) - gt.row(k);
    sum += diff.squaredNorm();
    grad.row(k) = (2.0 / count) * diff;
  }
  return sum / count;
}

double loss_geo(const Joints3D& joints, std::span<const FingerChain> chains) {
  if (chains.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& chain : chains) {
    const auto v = chain_vectors(joints, chain);
    const Eigen::Vector3d n1 = v.ab.cross(v.bc);
    const double coplanar = n1.dot(v.cd);
    const double curl = n1.dot(v.bc.cross(v.cd));
    const double hinge = std::max(0.0, -curl);
    sum += coplanar * coplanar + hinge * hinge;
  }
  return sum / static_cast<double>(chains.size());
}

double loss_geo(const Joints3D& joints, std::span<const FingerChain> chains, Points3& grad) {
  grad.setZero();
  if (chains.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(chains.size());
  double sum = 0.0;
  for (const auto& chain : chains) {
    const auto v = chain_vectors(joints, chain);
    const Eigen::Vector3d n1 = v.ab.cross(v.bc);
    const Eigen::Vector3d n2 = v.bc.cross(v.cd);
    const double coplanar = n1.dot(v.cd);
    const double hinge = std::max(0.0, -n1.dot(n2));
    sum += coplanar * coplanar + hinge * hinge;

    // d(term)/dV for the three difference vectors.
    Eigen::Vector3d g_ab = 2.0 * coplanar * v.bc.cross(v.cd);
    Eigen::Vector3d g_bc = 2.0 * coplanar * v.cd.cross(v.ab);
    Eigen::Vector3d g_cd = 2.0 * coplanar * n1;
    if (hinge > 0.0) {
      // d(hinge^2)/d(curl) = -2 hinge; curl = n1 . n2
      const double g_curl = -2.0 * hinge;
      const Eigen::Vector3d g_n1 = g_curl * n2;
      const Eigen::Vector3d g_n2 = g_curl * n1;
      g_ab += v.bc.cross(g_n1);
      g_bc += g_n1.cross(v.ab) + v.cd.cross(g_n2);
      g_cd += g_n2.cross(v.bc);
    }
    g_ab *= inv;
    g_bc *= inv;
    g_cd *= inv;
    grad.row(chain[0]) += g_ab.transpose();
    grad.row(chain[1]) += (g_bc - g_ab).transpose();
    grad.row(chain[2]) += (g_cd - g_bc).transpose();
    grad.row(chain[3]) -= g_cd.transpose();
  }
  return sum * inv;
}

double loss_cam(const CameraParams& pred, const CameraParams& gt) {
  return (pred.as_vector() - gt.as_vector()).squaredNorm();
}

double loss_seg(const Mask& rendered, const Mask& gt) {
  if (rendered.height() != gt.height() || rendered.width() != gt.width()) {
    throw InvalidArgument("loss_seg: mask dimensions differ");
  }
  if (rendered.data.size() == 0) return 0.0;
  return (rendered.data - gt.data).abs().mean();
}

LossBreakdown total_loss(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  const std::pair<const char*, double> named[] = {
      {"l3d", terms.l3d}, {"l2d", terms.l2d}, {"geo", terms.geo},
      {"cam", terms.cam}, {"ht", terms.ht},   {"seg", terms.seg},
  };
  for (const auto& [name, value] : named) {
    if (!std::isfinite(value)) throw InvalidState(std::string("non-finite loss term: ") + name);
  }
  LossBreakdown out;
  out.terms = terms;
  out.total = weights.lambda_3d * terms.l3d + weights.lambda_2d * terms.l2d + weights.lambda_geo * terms.geo +
              weights.lambda_cam * terms.cam + weights.lambda_ht * terms.ht + weights.lambda_seg * terms.seg;
  return out;
}

}  // namespace hamr
