#pragma once

#include <array>
#include <span>
#include <utility>

#include "hamr/model.hpp"

namespace hamr {

using Availability = std::array<bool, kNumPoints>;
using Points3 = Eigen::Matrix<double, kNumPoints, 3, Eigen::RowMajor>;
using Points2 = Eigen::Matrix<double, kNumPoints, 2, Eigen::RowMajor>;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr Availability all_available() {
  Availability a{};
  for (auto& v : a) v = true;
  return a;
}

/// 21 points: the 16 model joints followed by the fingertips thumb..pinky.
/// Unannotated points are flagged unavailable; their coordinates are ignored.
struct Joints3D {
  Points3 points = Points3::Zero();
  Availability available = all_available();
};

/// Pixel coordinates, same ordering as Joints3D. Origin top-left, x right,
/// y down; pixel (c, r) covers [c, c+1) x [r, r+1).
struct Keypoints2D {
  Points2 points = Points2::Zero();
  Availability available = all_available();
};

/// Weak-perspective camera: (x, y, z) -> (s (x + tx), s (y + ty)).
struct CameraParams {
  double s = 1.0;   // pixels per model unit
  double tx = 0.0;  // model units
  double ty = 0.0;

  [[nodiscard]] Eigen::Vector3d as_vector() const { return {s, tx, ty}; }
  static CameraParams from_vector(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
};

/// Which part of a 3D bone enters the scale ratio of camera_from_pairs.
enum class BoneLength {
  Planar,  // xy components only; exact under weak perspective
  Full,    // full 3D length
};

Joints3D regress_joints(const HandModel& model, const Vertices& vertices);
Joints3D regress_joints(const HandModel& model, const Mesh& mesh);

Eigen::Vector2d project_point(const Eigen::Vector3d& point, const CameraParams& cam);
Keypoints2D project(const Joints3D& joints, const CameraParams& cam);

/// Camera that best explains paired 2D/3D annotations: scale from the ratio
/// of mean bone lengths, offsets averaged over the points. Only points (and
/// bones whose endpoints are) available in both sets are used.
CameraParams camera_from_pairs(const Joints3D& joints, const Keypoints2D& keypoints,
                               std::span<const std::pair<int, int>> edges,
                               BoneLength mode = BoneLength::Planar);

}  // namespace hamr
