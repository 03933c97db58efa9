#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <utility>
#include <vector>

namespace hamr {

inline constexpr int kNumShape = 10;
inline constexpr int kNumModelJoints = 16;
inline constexpr int kNumFingertips = 5;
inline constexpr int kNumPoints = kNumModelJoints + kNumFingertips;
inline constexpr int kNumChains = 4;

using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
using JointPositions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using ShapeVector = Eigen::Matrix<double, kNumShape, 1>;

/// Ordered joint indices (into the 21-point set) of one non-thumb finger,
/// tip first, palm last.
using FingerChain = std::array<int, 4>;

/// How the pose-corrective blendshapes consume the pose. Only the SMPL-style
/// feature is implemented; the tag is stored in model files so that converted
/// assets declare what they were built for.
inline constexpr const char* kPoseFeatureRotationMinusRest = "rotation_minus_rest";

/// Immutable parametric hand model.
///
/// Flattened per-vertex bases (shape_basis, pose_basis) are vertex-major:
/// row 3*i + c holds coordinate c of vertex i. Pose features are the
/// row-major flattening of R(theta_k) - R(theta*_k) for every non-root joint,
/// so column 9*(k-1) + 3*r + c of pose_basis pairs with entry (r, c) of
/// joint k.
struct HandModel {
  std::string name;
  Vertices template_vertices;                // N x 3
  Faces faces;                               // F x 3, counter-clockwise
  std::vector<int> joint_parents;            // K, root has -1
  Eigen::MatrixXd skinning_weights;          // N x K
  Eigen::MatrixXd joint_regressor;           // N x K
  Eigen::MatrixXd shape_basis;               // 3N x 10
  Eigen::MatrixXd pose_basis;                // 3N x 9(K-1)
  JointPositions rest_pose;                  // K x 3 axis-angle
  std::array<int, kNumFingertips> fingertip_vertex_ids{};
  std::array<FingerChain, kNumChains> finger_chains{};
  std::vector<std::pair<int, int>> skeleton_edges;  // (child, parent) over the 21 points
  std::string pose_feature = kPoseFeatureRotationMinusRest;

  [[nodiscard]] int num_vertices() const { return static_cast<int>(template_vertices.rows()); }
  [[nodiscard]] int num_joints() const { return static_cast<int>(joint_parents.size()); }
};

struct ShapeParams {
  ShapeVector beta = ShapeVector::Zero();
};

struct PoseParams {
  JointPositions theta;  // K x 3 Rodrigues vectors, radians

  static PoseParams zeros(int num_joints) {
    return PoseParams{JointPositions::Zero(num_joints, 3)};
  }
};

struct Mesh {
  Vertices vertices;
  Faces faces;
};

struct ValidationIssue {
  std::string invariant;
  std::string location;
};

struct ValidationReport {
  std::vector<ValidationIssue> failures;

  [[nodiscard]] bool ok() const { return failures.empty(); }
  [[nodiscard]] std::string summary() const;
};

// Axis-angle to rotation matrix. Below 1e-8 rad a second-order Taylor
// expansion is used so the map stays differentiable at zero.
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis_angle);

// Partial derivatives dR/d(axis_angle_i), i = 0..2, consistent with
// rodrigues() on both branches.
std::array<Eigen::Matrix3d, 3> rodrigues_jacobian(const Eigen::Vector3d& axis_angle);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Joint order in which every parent precedes its children.
std::vector<int> topological_order(const std::vector<int>& parents);

/// Joints of the shaped rest mesh, J^T (T + B_S(beta)).
JointPositions rest_joints(const HandModel& model, const ShapeParams& shape);

/// Per-joint transforms mapping rest-pose space to posed space:
/// G_k(theta) * G_k(theta*)^-1, where G_k chains local rotations about the
/// rest joint positions from the root down.
std::vector<Eigen::Matrix4d> forward_kinematics(const HandModel& model, const PoseParams& pose,
                                                const JointPositions& rest);

/// Skinned mesh M(beta, theta).
Mesh lbs_forward(const HandModel& model, const ShapeParams& shape, const PoseParams& pose);

/// Checks every structural and numerical invariant of a HandModel.
ValidationReport validate_model(const HandModel& model);

}  // namespace hamr
