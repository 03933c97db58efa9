#include "hamr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hamr/errors.hpp"

namespace hamr {

namespace {

template <class Points>
std::vector<double> paired_errors(const Points& pred, const Points& gt, const Availability& a,
                                  const Availability& b) {
  std::vector<double> out;
  for (int k = 0; k < kNumPoints; ++k) {
    if (a[k] && b[k]) out.push_back((pred.row(k) - gt.row(k)).norm());
  }
  return out;
}

}  // namespace

std::vector<double> joint_errors(const Joints3D& pred, const Joints3D& gt) {
  return paired_errors(pred.points, gt.points, pred.available, gt.available);
}

std::vector<double> joint_errors(const Keypoints2D& pred, const Keypoints2D& gt) {
  return paired_errors(pred.points, gt.points, pred.available, gt.available);
}

double mpjpe(const Eigen::Ref<const RowMatrixXd>& pred, const Eigen::Ref<const RowMatrixXd>& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) throw InvalidArgument("mpjpe: point count mismatch");
  if (pred.rows() == 0) throw InvalidArgument("mpjpe: no points");
  return (pred - gt).rowwise().norm().mean();
}

double mpjpe(const Joints3D& pred, const Joints3D& gt) {
  const auto errors = joint_errors(pred, gt);
  if (errors.empty()) throw InvalidArgument("mpjpe: no point is available in both sets");
  return std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
}

PckCurve pck_auc(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) throw InvalidArgument("pck_auc: no errors");
  if (thresholds.empty()) throw InvalidArgument("pck_auc: no thresholds");
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) throw InvalidArgument("pck_auc: thresholds must be ascending");
  }
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  PckCurve curve;
  curve.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double t : thresholds) {
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    curve.values.push_back(static_cast<double>(below) / static_cast<double>(sorted.size()));
  }
  if (thresholds.size() == 1) {
    curve.auc = curve.values.front();
    return curve;
  }
  double area = 0.0;
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    area += 0.5 * (curve.values[i] + curve.values[i - 1]) * (thresholds[i] - thresholds[i - 1]);
  }
  curve.auc = area / (thresholds.back() - thresholds.front());
  return curve;
}

std::vector<double> threshold_grid(double lo, double hi, int count) {
  if (count < 1 || !(hi >= lo)) throw InvalidArgument("threshold_grid: bad range");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = lo + (hi - lo) * i / (count - 1);
  return out;
}

double mean_iou(std::span<const double> ious) {
  if (ious.empty()) throw InvalidArgument("mean_iou: no values");
  return std::accumulate(ious.begin(), ious.end(), 0.0) / static_cast<double>(ious.size());
}

}  // namespace hamr
