#include "hamr/skinning.hpp"

#include <utility>

#include "hamr/errors.hpp"

namespace hamr {

namespace {

Eigen::Map<const Eigen::VectorXd> flat(const Vertices& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

Eigen::Map<Eigen::VectorXd> flat(Vertices& v) { return Eigen::Map<Eigen::VectorXd>(v.data(), v.size()); }

}  // namespace

Skinner::Skinner(const HandModel& model) : model_(&model) {
  const int n = model.num_vertices();
  const int k_count = model.num_joints();
  if (model.skinning_weights.rows() != n || model.skinning_weights.cols() != k_count ||
      model.joint_regressor.rows() != n || model.joint_regressor.cols() != k_count ||
      model.shape_basis.rows() != 3 * n || model.shape_basis.cols() != kNumShape ||
      model.pose_basis.rows() != 3 * n || model.pose_basis.cols() != 9 * (k_count - 1) ||
      model.rest_pose.rows() != k_count) {
    throw InvalidArgument("Skinner: model dimensions are inconsistent");
  }
  order_ = topological_order(model.joint_parents);
  if (static_cast<int>(order_.size()) != k_count) throw InvalidArgument("Skinner: joint_parents is not a tree");

  influence_offsets_.reserve(n + 1);
  influence_offsets_.push_back(0);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < k_count; ++k) {
      const double w = model.skinning_weights(i, k);
      if (w != 0.0) influences_.push_back({k, w});
    }
    influence_offsets_.push_back(static_cast<int>(influences_.size()));
  }

  joint_template_ = model.joint_regressor.transpose() * model.template_vertices;
  joint_shape_.resize(3 * k_count, kNumShape);
  for (int s = 0; s < kNumShape; ++s) {
    const Eigen::Map<const Vertices> component(model.shape_basis.col(s).data(), n, 3);
    const JointPositions moved = model.joint_regressor.transpose() * component;
    joint_shape_.col(s) = Eigen::Map<const Eigen::VectorXd>(moved.data(), moved.size());
  }

  rest_local_rot_.resize(k_count);
  rest_global_rot_.resize(k_count);
  for (int k : order_) {
    rest_local_rot_[k] = rodrigues(model.rest_pose.row(k).transpose());
    const int p = model.joint_parents[k];
    rest_global_rot_[k] = p < 0 ? rest_local_rot_[k] : Eigen::Matrix3d(rest_global_rot_[p] * rest_local_rot_[k]);
  }
  has_pose_basis_ = model.pose_basis.size() > 0 && (model.pose_basis.array() != 0.0).any();
}

void Skinner::check_params(const ShapeParams& shape, const PoseParams& pose) const {
  if (pose.theta.rows() != model_->num_joints()) throw InvalidArgument("Skinner: pose has wrong joint count");
  if (!shape.beta.allFinite()) throw InvalidArgument("Skinner: non-finite beta");
  if (!pose.theta.allFinite()) throw InvalidArgument("Skinner: non-finite theta");
}

void Skinner::forward(const ShapeParams& shape, const PoseParams& pose, Tape& tape) const {
  check_params(shape, pose);
  const HandModel& m = *model_;
  const int n = m.num_vertices();
  const int k_count = m.num_joints();

  tape.theta = pose.theta;
  tape.rest_joints = joint_template_;
  Eigen::Map<Eigen::VectorXd>(tape.rest_joints.data(), 3 * k_count) += joint_shape_ * shape.beta;
  const JointPositions& joints = tape.rest_joints;

  tape.local_rot.resize(k_count);
  tape.global_rot.resize(k_count);
  tape.global_trans.resize(k_count);
  tape.rest_trans.resize(k_count);
  tape.rel_rot.resize(k_count);
  tape.rel_trans.resize(k_count);

  for (int k : order_) {
    tape.local_rot[k] = rodrigues(pose.theta.row(k).transpose());
    const int p = m.joint_parents[k];
    if (p < 0) {
      tape.global_rot[k] = tape.local_rot[k];
      tape.global_trans[k] = joints.row(k).transpose();
      tape.rest_trans[k] = joints.row(k).transpose();
    } else {
      const Eigen::Vector3d bone = (joints.row(k) - joints.row(p)).transpose();
      tape.global_rot[k] = tape.global_rot[p] * tape.local_rot[k];
      tape.global_trans[k] = tape.global_rot[p] * bone + tape.global_trans[p];
      tape.rest_trans[k] = rest_global_rot_[p] * bone + tape.rest_trans[p];
    }
  }
  for (int k = 0; k < k_count; ++k) {
    tape.rel_rot[k] = tape.global_rot[k] * rest_global_rot_[k].transpose();
    tape.rel_trans[k] = tape.global_trans[k] - tape.rel_rot[k] * tape.rest_trans[k];
  }

  tape.blended = m.template_vertices;
  auto blended_flat = flat(tape.blended);
  blended_flat += m.shape_basis * shape.beta;
  if (has_pose_basis_) {
    Eigen::VectorXd feature(9 * (k_count - 1));
    for (int k = 1; k < k_count; ++k) {
      const Eigen::Matrix3d diff = tape.local_rot[k] - rest_local_rot_[k];
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) feature[9 * (k - 1) + 3 * r + c] = diff(r, c);
    }
    blended_flat += m.pose_basis * feature;
  }

  tape.vertices.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    Eigen::Matrix3d rot = Eigen::Matrix3d::Zero();
    Eigen::Vector3d trans = Eigen::Vector3d::Zero();
    for (int e = influence_offsets_[i]; e < influence_offsets_[i + 1]; ++e) {
      const auto& inf = influences_[e];
      rot += inf.weight * tape.rel_rot[inf.joint];
      trans += inf.weight * tape.rel_trans[inf.joint];
    }
    tape.vertices.row(i) = (rot * tape.blended.row(i).transpose() + trans).transpose();
  }
}

Vertices Skinner::forward(const ShapeParams& shape, const PoseParams& pose) const {
  Tape tape;
  forward(shape, pose, tape);
  return std::move(tape.vertices);
}

void Skinner::backward(const Tape& tape, const Vertices& grad_vertices, ShapeVector& grad_beta,
                       JointPositions& grad_theta) const {
  const HandModel& m = *model_;
  const int n = m.num_vertices();
  const int k_count = m.num_joints();
  if (grad_vertices.rows() != n) throw InvalidArgument("Skinner::backward: gradient has wrong vertex count");
  if (grad_theta.rows() != k_count) grad_theta = JointPositions::Zero(k_count, 3);

  std::vector<Eigen::Matrix3d> g_rel_rot(k_count, Eigen::Matrix3d::Zero());
  std::vector<Eigen::Vector3d> g_rel_trans(k_count, Eigen::Vector3d::Zero());
  Vertices g_blended = Vertices::Zero(n, 3);

  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d g = grad_vertices.row(i).transpose();
    if (g.isZero(0.0)) continue;
    const Eigen::Vector3d t = tape.blended.row(i).transpose();
    Eigen::Vector3d g_t = Eigen::Vector3d::Zero();
    for (int e = influence_offsets_[i]; e < influence_offsets_[i + 1]; ++e) {
      const auto& inf = influences_[e];
      g_rel_rot[inf.joint].noalias() += inf.weight * g * t.transpose();
      g_rel_trans[inf.joint] += inf.weight * g;
      g_t.noalias() += inf.weight * tape.rel_rot[inf.joint].transpose() * g;
    }
    g_blended.row(i) = g_t.transpose();
  }

  const auto g_blended_flat = flat(std::as_const(g_blended));
  grad_beta.noalias() += m.shape_basis.transpose() * g_blended_flat;

  std::vector<Eigen::Matrix3d> g_local(k_count, Eigen::Matrix3d::Zero());
  if (has_pose_basis_) {
    const Eigen::VectorXd g_feature = m.pose_basis.transpose() * g_blended_flat;
    for (int k = 1; k < k_count; ++k)
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) g_local[k](r, c) += g_feature[9 * (k - 1) + 3 * r + c];
  }

  // Relative transform Q = Rg R*^T, a = tg - Q t*.
  std::vector<Eigen::Matrix3d> g_global_rot(k_count);
  std::vector<Eigen::Vector3d> g_global_trans(k_count);
  std::vector<Eigen::Vector3d> g_rest_trans(k_count);
  for (int k = 0; k < k_count; ++k) {
    const Eigen::Matrix3d g_q = g_rel_rot[k] - g_rel_trans[k] * tape.rest_trans[k].transpose();
    g_global_rot[k] = g_q * rest_global_rot_[k];
    g_global_trans[k] = g_rel_trans[k];
    g_rest_trans[k] = -tape.rel_rot[k].transpose() * g_rel_trans[k];
  }

  JointPositions g_joints = JointPositions::Zero(k_count, 3);
  const JointPositions& joints = tape.rest_joints;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const int k = *it;
    const int p = m.joint_parents[k];
    if (p < 0) {
      g_local[k] += g_global_rot[k];
      g_joints.row(k) += (g_global_trans[k] + g_rest_trans[k]).transpose();
      continue;
    }
    const Eigen::Vector3d bone = (joints.row(k) - joints.row(p)).transpose();
    g_global_rot[p].noalias() += g_global_rot[k] * tape.local_rot[k].transpose();
    g_local[k].noalias() += tape.global_rot[p].transpose() * g_global_rot[k];
    g_global_rot[p].noalias() += g_global_trans[k] * bone.transpose();
    const Eigen::Vector3d g_bone =
        tape.global_rot[p].transpose() * g_global_trans[k] + rest_global_rot_[p].transpose() * g_rest_trans[k];
    g_joints.row(k) += g_bone.transpose();
    g_joints.row(p) -= g_bone.transpose();
    g_global_trans[p] += g_global_trans[k];
    g_rest_trans[p] += g_rest_trans[k];
  }

  grad_beta.noalias() += joint_shape_.transpose() * Eigen::Map<const Eigen::VectorXd>(g_joints.data(), 3 * k_count);

  for (int k = 0; k < k_count; ++k) {
    if (g_local[k].isZero(0.0)) continue;
    const auto d = rodrigues_jacobian(tape.theta.row(k).transpose());
    for (int c = 0; c < 3; ++c) grad_theta(k, c) += g_local[k].cwiseProduct(d[c]).sum();
  }
}

}  // namespace hamr
