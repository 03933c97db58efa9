#include "hamr/pose.hpp"

#include <cmath>

#include "hamr/errors.hpp"

namespace hamr {

namespace {

void check_camera(const CameraParams& cam) {
  if (!(cam.s > 0.0) || !std::isfinite(cam.s) || !std::isfinite(cam.tx) || !std::isfinite(cam.ty)) {
    throw InvalidArgument("camera scale must be positive and finite");
  }
}

}  // namespace

Joints3D regress_joints(const HandModel& model, const Vertices& vertices) {
  if (vertices.rows() != model.num_vertices()) {
    throw InvalidArgument("regress_joints: mesh has " + std::to_string(vertices.rows()) + " vertices, model has " +
                          std::to_string(model.num_vertices()));
  }
  if (model.num_joints() != kNumModelJoints) throw InvalidArgument("regress_joints: model must have 16 joints");
  Joints3D out;
  out.points.topRows<kNumModelJoints>() = model.joint_regressor.transpose() * vertices;
  for (int t = 0; t < kNumFingertips; ++t) {
    out.points.row(kNumModelJoints + t) = vertices.row(model.fingertip_vertex_ids[t]);
  }
  return out;
}

Joints3D regress_joints(const HandModel& model, const Mesh& mesh) { return regress_joints(model, mesh.vertices); }

Eigen::Vector2d project_point(const Eigen::Vector3d& point, const CameraParams& cam) {
  return {cam.s * (point.x() + cam.tx), cam.s * (point.y() + cam.ty)};
}

Keypoints2D project(const Joints3D& joints, const CameraParams& cam) {
  check_camera(cam);
  Keypoints2D out;
  out.available = joints.available;
  for (int k = 0; k < kNumPoints; ++k) {
    out.points.row(k) = project_point(joints.points.row(k).transpose(), cam).transpose();
  }
  return out;
}

CameraParams camera_from_pairs(const Joints3D& joints, const Keypoints2D& keypoints,
                               std::span<const std::pair<int, int>> edges, BoneLength mode) {
  auto paired = [&](int k) { return k >= 0 && k < kNumPoints && joints.available[k] && keypoints.available[k]; };

  double sum_2d = 0.0;
  double sum_3d = 0.0;
  int bones = 0;
  for (const auto& [child, parent] : edges) {
    if (!paired(child) || !paired(parent)) continue;
    sum_2d += (keypoints.points.row(child) - keypoints.points.row(parent)).norm();
    const Eigen::RowVector3d bone = joints.points.row(child) - joints.points.row(parent);
    sum_3d += mode == BoneLength::Planar ? bone.head<2>().norm() : bone.norm();
    ++bones;
  }
  if (bones == 0 || sum_3d <= 0.0) {
    throw DegenerateInput("camera_from_pairs: mean 3D bone length is zero");
  }
  CameraParams cam;
  cam.s = sum_2d / sum_3d;
  if (!(cam.s > 0.0)) throw DegenerateInput("camera_from_pairs: mean 2D bone length is zero");

  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
  int count = 0;
  for (int k = 0; k < kNumPoints; ++k) {
    if (!paired(k)) continue;
    offset += keypoints.points.row(k).transpose() / cam.s - joints.points.row(k).head<2>().transpose();
    ++count;
  }
  offset /= count;
  cam.tx = offset.x();
  cam.ty = offset.y();
  return cam;
}

}  // namespace hamr
