#pragma once

#include <span>

#include "hamr/image.hpp"
#include "hamr/pose.hpp"

namespace hamr {

struct LossWeights {
  double lambda_3d = 1000.0;
  double lambda_2d = 1.0;
  double lambda_geo = 1.0;
  double lambda_cam = 0.1;
  double lambda_ht = 100.0;
  double lambda_seg = 10.0;

  /// Throws InvalidArgument unless every weight is finite and >= 0.
  void validate() const;
};

struct LossTerms {
  double l3d = 0.0;
  double l2d = 0.0;
  double geo = 0.0;
  double cam = 0.0;
  double ht = 0.0;
  double seg = 0.0;
};

struct LossBreakdown {
  LossTerms terms;
  // Soft limit on rotation magnitudes, already weighted; zero outside fitting.
  double rotation_penalty = 0.0;
  double total = 0.0;
};

/// Mean squared distance over points flagged in `mask`; 0 when none is.
/// Works for any point dimension (2D or 3D rows).
double loss_keypoints(const Eigen::Ref<const RowMatrixXd>& pred, const Eigen::Ref<const RowMatrixXd>& gt,
                      std::span<const bool> mask);

/// Same, also writing dL/dpred (rows of unmasked points are zero).
double loss_keypoints(const Eigen::Ref<const RowMatrixXd>& pred, const Eigen::Ref<const RowMatrixXd>& gt,
                      std::span<const bool> mask, Eigen::Ref<RowMatrixXd> grad);

/// Coplanarity and consistent-curl regulariser, averaged over the finger
/// chains. Per chain (a, b, c, d) with V_ab = a - b etc.:
///   ((V_ab x V_bc) . V_cd)^2 + max(0, -(V_ab x V_bc) . (V_bc x V_cd))^2
double loss_geo(const Joints3D& joints, std::span<const FingerChain> chains);
double loss_geo(const Joints3D& joints, std::span<const FingerChain> chains,
                Points3& grad);

double loss_cam(const CameraParams& pred, const CameraParams& gt);

/// Mean absolute per-pixel difference.
double loss_seg(const Mask& rendered, const Mask& gt);

/// Weighted sum of the six terms. Throws InvalidState naming the first
/// non-finite term.
LossBreakdown total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace hamr
