#include "hamr/model.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <queue>
#include <sstream>

#include "hamr/errors.hpp"
#include "hamr/skinning.hpp"

namespace hamr {

namespace {

constexpr double kSmallAngle = 1e-8;
constexpr double kSumTolerance = 1e-9;

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

}  // namespace

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (const auto& f : failures) out << f.invariant << " at " << f.location << '\n';
  return out.str();
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis_angle) {
  if (!axis_angle.allFinite()) throw InvalidArgument("rodrigues: non-finite axis-angle");
  const double angle = axis_angle.norm();
  const Eigen::Matrix3d k = skew(axis_angle);
  if (angle < kSmallAngle) return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
  const double a = std::sin(angle) / angle;
  const double b = (1.0 - std::cos(angle)) / (angle * angle);
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

std::array<Eigen::Matrix3d, 3> rodrigues_jacobian(const Eigen::Vector3d& axis_angle) {
  if (!axis_angle.allFinite()) throw InvalidArgument("rodrigues_jacobian: non-finite axis-angle");
  std::array<Eigen::Matrix3d, 3> d;
  const double angle = axis_angle.norm();
  const Eigen::Matrix3d k = skew(axis_angle);
  if (angle < kSmallAngle) {
    for (int i = 0; i < 3; ++i) {
      const Eigen::Matrix3d e = skew(Eigen::Vector3d::Unit(i));
      d[i] = e + 0.5 * (e * k + k * e);
    }
    return d;
  }
  // Closed form of Gallego & Yezzi for the derivative of the exponential map.
  const Eigen::Matrix3d r = rodrigues(axis_angle);
  const Eigen::Matrix3d i_minus_r = Eigen::Matrix3d::Identity() - r;
  const double inv_sq = 1.0 / (angle * angle);
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d col = axis_angle.cross(i_minus_r.col(i));
    d[i] = (axis_angle[i] * k + skew(col)) * inv_sq * r;
  }
  return d;
}

std::vector<int> topological_order(const std::vector<int>& parents) {
  const int n = static_cast<int>(parents.size());
  std::vector<std::vector<int>> children(n);
  int root = -1;
  for (int k = 0; k < n; ++k) {
    if (parents[k] < 0) {
      root = k;
    } else if (parents[k] < n) {
      children[parents[k]].push_back(k);
    }
  }
  std::vector<int> order;
  if (root < 0) return order;
  order.reserve(n);
  std::queue<int> pending;
  pending.push(root);
  while (!pending.empty()) {
    const int k = pending.front();
    pending.pop();
    order.push_back(k);
    for (int c : children[k]) pending.push(c);
  }
  return order;
}

JointPositions rest_joints(const HandModel& model, const ShapeParams& shape) {
  const int n = model.num_vertices();
  if (model.shape_basis.rows() != 3 * n || model.shape_basis.cols() != kNumShape ||
      model.joint_regressor.rows() != n || model.joint_regressor.cols() != model.num_joints()) {
    throw InvalidArgument("rest_joints: model dimensions are inconsistent");
  }
  if (!shape.beta.allFinite()) throw InvalidArgument("rest_joints: non-finite beta");
  Vertices shaped = model.template_vertices;
  Eigen::Map<Eigen::VectorXd>(shaped.data(), 3 * n) += model.shape_basis * shape.beta;
  return model.joint_regressor.transpose() * shaped;
}

std::vector<Eigen::Matrix4d> forward_kinematics(const HandModel& model, const PoseParams& pose,
                                                const JointPositions& rest) {
  const int k_count = model.num_joints();
  if (pose.theta.rows() != k_count || rest.rows() != k_count || model.rest_pose.rows() != k_count) {
    throw InvalidArgument("forward_kinematics: joint count mismatch");
  }
  if (!pose.theta.allFinite() || !rest.allFinite()) {
    throw InvalidArgument("forward_kinematics: non-finite input");
  }
  const auto order = topological_order(model.joint_parents);
  if (static_cast<int>(order.size()) != k_count) {
    throw InvalidArgument("forward_kinematics: joint_parents is not a tree");
  }

  auto chain = [&](const JointPositions& angles) {
    std::vector<Eigen::Matrix4d> global(k_count, Eigen::Matrix4d::Identity());
    for (int k : order) {
      Eigen::Matrix4d local = Eigen::Matrix4d::Identity();
      local.topLeftCorner<3, 3>() = rodrigues(angles.row(k).transpose());
      const int p = model.joint_parents[k];
      if (p < 0) {
        local.topRightCorner<3, 1>() = rest.row(k).transpose();
        global[k] = local;
      } else {
        local.topRightCorner<3, 1>() = (rest.row(k) - rest.row(p)).transpose();
        global[k] = global[p] * local;
      }
    }
    return global;
  };

  const auto posed = chain(pose.theta);
  const auto at_rest = chain(model.rest_pose);
  std::vector<Eigen::Matrix4d> relative(k_count);
  for (int k = 0; k < k_count; ++k) {
    Eigen::Matrix4d rest_inv = Eigen::Matrix4d::Identity();
    const Eigen::Matrix3d rt = at_rest[k].topLeftCorner<3, 3>().transpose();
    rest_inv.topLeftCorner<3, 3>() = rt;
    rest_inv.topRightCorner<3, 1>() = -rt * at_rest[k].topRightCorner<3, 1>();
    relative[k] = posed[k] * rest_inv;
  }
  return relative;
}

Mesh lbs_forward(const HandModel& model, const ShapeParams& shape, const PoseParams& pose) {
  const Skinner skinner(model);
  return Mesh{skinner.forward(shape, pose), model.faces};
}

ValidationReport validate_model(const HandModel& model) {
  ValidationReport report;
  auto fail = [&](std::string invariant, std::string location) {
    report.failures.push_back({std::move(invariant), std::move(location)});
  };

  const int n = model.num_vertices();
  const int k_count = model.num_joints();

  if (n == 0) fail("template_vertices non-empty", "template_vertices");
  if (!all_finite(model.template_vertices)) fail("finite values", "template_vertices");
  if (k_count != kNumModelJoints) {
    fail("joint count equals " + std::to_string(kNumModelJoints),
         "joint_parents (size " + std::to_string(k_count) + ")");
  }

  // Kinematic tree rooted at joint 0.
  if (k_count > 0) {
    int roots = 0;
    for (int k = 0; k < k_count; ++k) {
      const int p = model.joint_parents[k];
      if (p < 0) {
        ++roots;
        if (k != 0) fail("tree rooted at joint 0", "joint_parents[" + std::to_string(k) + "]");
      } else if (p >= k_count || p == k) {
        fail("parent index in range", "joint_parents[" + std::to_string(k) + "]");
      }
    }
    if (roots != 1) fail("single root", "joint_parents");
    for (int k = 0; k < k_count; ++k) {
      int cursor = k;
      int steps = 0;
      while (cursor >= 0 && cursor < k_count && steps <= k_count) {
        cursor = model.joint_parents[cursor];
        ++steps;
      }
      if (steps > k_count) {
        fail("tree without cycles", "joint_parents[" + std::to_string(k) + "]");
        break;
      }
    }
  }

  if (model.skinning_weights.rows() != n || model.skinning_weights.cols() != k_count) {
    fail("skinning_weights shape N x K", "skinning_weights");
  } else {
    for (int i = 0; i < n; ++i) {
      const auto row = model.skinning_weights.row(i);
      if (!row.allFinite() || (row.array() < 0.0).any()) {
        fail("skinning weights nonnegative", "skinning_weights row " + std::to_string(i));
      } else if (std::abs(row.sum() - 1.0) > kSumTolerance) {
        fail("skinning row sums to 1", "skinning_weights row " + std::to_string(i));
      }
    }
  }

  if (model.joint_regressor.rows() != n || model.joint_regressor.cols() != k_count) {
    fail("joint_regressor shape N x K", "joint_regressor");
  } else {
    for (int k = 0; k < k_count; ++k) {
      const auto col = model.joint_regressor.col(k);
      if (!col.allFinite() || std::abs(col.sum() - 1.0) > kSumTolerance) {
        fail("regressor column sums to 1", "joint_regressor column " + std::to_string(k));
      }
    }
  }

  if (model.shape_basis.rows() != 3 * n || model.shape_basis.cols() != kNumShape) {
    fail("shape_basis has 10 components of N x 3", "shape_basis");
  } else if (!all_finite(model.shape_basis)) {
    fail("finite values", "shape_basis");
  }
  if (model.pose_basis.rows() != 3 * n || model.pose_basis.cols() != 9 * std::max(k_count - 1, 0)) {
    fail("pose_basis has 9(K-1) components of N x 3", "pose_basis");
  } else if (!all_finite(model.pose_basis)) {
    fail("finite values", "pose_basis");
  }
  if (model.rest_pose.rows() != k_count) {
    fail("rest_pose shape K x 3", "rest_pose");
  } else if (!all_finite(model.rest_pose)) {
    fail("finite values", "rest_pose");
  }
  if (model.pose_feature != kPoseFeatureRotationMinusRest) {
    fail("supported pose feature", "pose_feature '" + model.pose_feature + "'");
  }

  for (int f = 0; f < model.faces.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int v = model.faces(f, c);
      if (v < 0 || v >= n) {
        fail("face index in range", "faces[" + std::to_string(f) + "]");
        break;
      }
    }
  }
  if (model.faces.rows() == 0) fail("faces non-empty", "faces");

  for (int t = 0; t < kNumFingertips; ++t) {
    const int v = model.fingertip_vertex_ids[t];
    if (v < 0 || v >= n) fail("fingertip index in range", "fingertip_vertex_ids[" + std::to_string(t) + "]");
  }

  for (int c = 0; c < kNumChains; ++c) {
    const auto& chain = model.finger_chains[c];
    bool in_range = true;
    for (int j : chain) in_range = in_range && j >= 0 && j < kNumPoints;
    if (!in_range) {
      fail("chain index in range", "finger_chains[" + std::to_string(c) + "]");
      continue;
    }
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        if (chain[a] == chain[b]) {
          fail("chain joints distinct", "finger_chains[" + std::to_string(c) + "]");
          a = 4;
          break;
        }
      }
    }
  }

  for (std::size_t e = 0; e < model.skeleton_edges.size(); ++e) {
    const auto [child, parent] = model.skeleton_edges[e];
    if (child < 0 || child >= kNumPoints || parent < 0 || parent >= kNumPoints || child == parent) {
      fail("skeleton edge index in range", "skeleton_edges[" + std::to_string(e) + "]");
    }
  }
  if (model.skeleton_edges.empty()) fail("skeleton_edges non-empty", "skeleton_edges");

  return report;
}

}  // namespace hamr
