#pragma once

#include <span>
#include <vector>

#include "hamr/image.hpp"
#include "hamr/pose.hpp"

namespace hamr {

struct HeatmapConfig {
  int height = 64;
  int width = 64;
  double sigma2 = 2.5;  // Gaussian variance, heatmap pixels^2

  void validate() const;
};

/// One Gaussian confidence map per keypoint, amplitude 1 at the keypoint.
struct Heatmaps {
  HeatmapConfig config;
  std::vector<MaskData> channels;
};

/// Keypoints are mapped from image pixels to heatmap pixels by the ratio of
/// the two resolutions; channel k is exp(-d^2 / (2 sigma2)) with d measured
/// from heatmap pixel centres. Out-of-image or unavailable keypoints give an
/// all-zero channel.
Heatmaps render_heatmaps(const Keypoints2D& keypoints, ImageSize image, const HeatmapConfig& config = {});

/// Per channel argmax (smallest row-major index on ties) mapped back to the
/// centre of the corresponding image region. All-zero channels decode as
/// unavailable.
Keypoints2D decode_heatmaps(const Heatmaps& heatmaps, ImageSize image);

/// Mean squared per-pixel difference over the channels selected by `mask`
/// (all channels when the mask is empty).
double loss_heatmaps(const Heatmaps& pred, const Heatmaps& gt, std::span<const bool> mask = {});

/// loss_heatmaps(render_heatmaps(pred), gt, mask) together with its gradient
/// with respect to the predicted keypoint pixels.
double heatmap_loss_and_grad(const Keypoints2D& pred, const Heatmaps& gt, ImageSize image,
                             std::span<const bool> mask, Points2& grad);

}  // namespace hamr
