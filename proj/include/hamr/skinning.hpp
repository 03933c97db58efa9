#pragma once

#include <Eigen/Core>
#include <vector>

#include "hamr/model.hpp"

namespace hamr {

/// Precomputed evaluator for M(beta, theta) with a reverse-mode backward pass.
///
/// Holds a pointer to the model; the model must outlive the Skinner.
class Skinner {
 public:
  /// Intermediate values of one forward pass, needed by backward().
  struct Tape {
    JointPositions theta;
    JointPositions rest_joints;                  // J(beta)
    std::vector<Eigen::Matrix3d> local_rot;      // R(theta_k)
    std::vector<Eigen::Matrix3d> global_rot;     // posed chain
    std::vector<Eigen::Vector3d> global_trans;
    std::vector<Eigen::Vector3d> rest_trans;     // translation of the theta* chain
    std::vector<Eigen::Matrix3d> rel_rot;        // G(theta) G(theta*)^-1
    std::vector<Eigen::Vector3d> rel_trans;
    Vertices blended;                            // T(beta, theta)
    Vertices vertices;                           // skinned output
  };

  explicit Skinner(const HandModel& model);

  [[nodiscard]] const HandModel& model() const { return *model_; }

  void forward(const ShapeParams& shape, const PoseParams& pose, Tape& tape) const;
  [[nodiscard]] Vertices forward(const ShapeParams& shape, const PoseParams& pose) const;

  /// Accumulates dL/dbeta and dL/dtheta given dL/dvertices.
  void backward(const Tape& tape, const Vertices& grad_vertices, ShapeVector& grad_beta,
                JointPositions& grad_theta) const;

 private:
  struct Influence {
    int joint;
    double weight;
  };

  void check_params(const ShapeParams& shape, const PoseParams& pose) const;

  const HandModel* model_;
  std::vector<int> order_;
  std::vector<int> influence_offsets_;  // CSR over vertices
  std::vector<Influence> influences_;
  Eigen::MatrixXd joint_shape_;         // 3K x 10, J^T applied to the shape basis
  JointPositions joint_template_;       // J^T T
  std::vector<Eigen::Matrix3d> rest_local_rot_;
  std::vector<Eigen::Matrix3d> rest_global_rot_;
  bool has_pose_basis_ = false;
};

}  // namespace hamr
