#pragma once

#include <span>
#include <vector>

#include "hamr/pose.hpp"

namespace hamr {

/// Fraction of joint errors at or below each threshold.
struct PckCurve {
  std::vector<double> thresholds;  // ascending
  std::vector<double> values;      // in [0, 1], non-decreasing
  double auc = 0.0;                // trapezoidal area over the threshold span, in [0, 1]
};

/// Euclidean distance per point, for points available in both sets.
std::vector<double> joint_errors(const Joints3D& pred, const Joints3D& gt);
std::vector<double> joint_errors(const Keypoints2D& pred, const Keypoints2D& gt);

/// Mean Euclidean distance between corresponding rows.
double mpjpe(const Eigen::Ref<const RowMatrixXd>& pred, const Eigen::Ref<const RowMatrixXd>& gt);

/// Mean over the points available in both sets.
double mpjpe(const Joints3D& pred, const Joints3D& gt);

/// Errors are pooled per joint: every (sample, joint) distance counts once.
/// A single threshold gives auc equal to its PCK value.
PckCurve pck_auc(std::span<const double> errors, std::span<const double> thresholds);

/// `count` evenly spaced thresholds from lo to hi inclusive.
std::vector<double> threshold_grid(double lo, double hi, int count);

/// Plain mean of per-sample IoU values.
double mean_iou(std::span<const double> ious);

}  // namespace hamr
