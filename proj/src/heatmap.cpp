#include "hamr/heatmap.hpp"

#include <cmath>

#include "hamr/errors.hpp"

namespace hamr {

namespace {

void check_image(ImageSize image) {
  if (image.height <= 0 || image.width <= 0) throw InvalidArgument("image size must be positive");
}

bool inside_image(const Eigen::Vector2d& p, ImageSize image) {
  return p.x() >= 0.0 && p.x() < image.width && p.y() >= 0.0 && p.y() < image.height;
}

// Separable Gaussian: exp(-(dx^2 + dy^2) / 2s2) = gx[c] * gy[r].
struct Profile {
  Eigen::ArrayXd gx, gy;
  Eigen::ArrayXd dx, dy;  // centre minus keypoint, heatmap pixels
};

Profile profile(const Eigen::Vector2d& image_point, ImageSize image, const HeatmapConfig& config) {
  const double hx = image_point.x() * config.width / image.width;
  const double hy = image_point.y() * config.height / image.height;
  Profile p;
  p.dx = Eigen::ArrayXd::LinSpaced(config.width, 0.5, config.width - 0.5) - hx;
  p.dy = Eigen::ArrayXd::LinSpaced(config.height, 0.5, config.height - 0.5) - hy;
  p.gx = (-p.dx.square() / (2.0 * config.sigma2)).exp();
  p.gy = (-p.dy.square() / (2.0 * config.sigma2)).exp();
  return p;
}

bool selected(std::span<const bool> mask, std::size_t k) { return mask.empty() || mask[k]; }

}  // namespace

void HeatmapConfig::validate() const {
  if (height <= 0 || width <= 0) throw InvalidArgument("heatmap resolution must be positive");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InvalidArgument("heatmap sigma2 must be positive");
}

Heatmaps render_heatmaps(const Keypoints2D& keypoints, ImageSize image, const HeatmapConfig& config) {
  config.validate();
  check_image(image);
  Heatmaps out;
  out.config = config;
  out.channels.reserve(kNumPoints);
  for (int k = 0; k < kNumPoints; ++k) {
    const Eigen::Vector2d p = keypoints.points.row(k).transpose();
    if (!keypoints.available[k] || !inside_image(p, image)) {
      out.channels.push_back(MaskData::Zero(config.height, config.width));
      continue;
    }
    const auto g = profile(p, image, config);
    out.channels.push_back((g.gy.matrix() * g.gx.matrix().transpose()).array());
  }
  return out;
}

Keypoints2D decode_heatmaps(const Heatmaps& heatmaps, ImageSize image) {
  check_image(image);
  const auto& config = heatmaps.config;
  Keypoints2D out;
  out.available.fill(false);
  for (std::size_t k = 0; k < heatmaps.channels.size() && k < static_cast<std::size_t>(kNumPoints); ++k) {
    const auto& ch = heatmaps.channels[k];
    if (ch.size() == 0) continue;
    Eigen::Index best = 0;
    double best_value = ch.data()[0];
    for (Eigen::Index i = 1; i < ch.size(); ++i) {
      if (ch.data()[i] > best_value) {
        best_value = ch.data()[i];
        best = i;
      }
    }
    if (!(best_value > 0.0)) continue;
    const Eigen::Index row = best / ch.cols();
    const Eigen::Index col = best % ch.cols();
    out.points(static_cast<int>(k), 0) = (col + 0.5) * image.width / config.width;
    out.points(static_cast<int>(k), 1) = (row + 0.5) * image.height / config.height;
    out.available[k] = true;
  }
  return out;
}

double loss_heatmaps(const Heatmaps& pred, const Heatmaps& gt, std::span<const bool> mask) {
  if (pred.channels.size() != gt.channels.size() ||
      (!mask.empty() && mask.size() != pred.channels.size())) {
    throw InvalidArgument("loss_heatmaps: channel count mismatch");
  }
  double sum = 0.0;
  Eigen::Index pixels = 0;
  for (std::size_t k = 0; k < pred.channels.size(); ++k) {
    const auto& a = pred.channels[k];
    const auto& b = gt.channels[k];
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgument("loss_heatmaps: shape mismatch");
    if (!selected(mask, k)) continue;
    sum += (a - b).square().sum();
    pixels += a.size();
  }
  return pixels == 0 ? 0.0 : sum / static_cast<double>(pixels);
}

double heatmap_loss_and_grad(const Keypoints2D& pred, const Heatmaps& gt, ImageSize image,
                             std::span<const bool> mask, Points2& grad) {
  check_image(image);
  const auto& config = gt.config;
  config.validate();
  if (gt.channels.size() != static_cast<std::size_t>(kNumPoints) ||
      (!mask.empty() && mask.size() != gt.channels.size())) {
    throw InvalidArgument("heatmap_loss_and_grad: channel count mismatch");
  }
  grad.setZero();
  int channels = 0;
  for (int k = 0; k < kNumPoints; ++k) channels += selected(mask, k) ? 1 : 0;
  if (channels == 0) return 0.0;
  const double norm = 1.0 / (static_cast<double>(channels) * config.height * config.width);
  const double to_hx = static_cast<double>(config.width) / image.width;
  const double to_hy = static_cast<double>(config.height) / image.height;

  double sum = 0.0;
  for (int k = 0; k < kNumPoints; ++k) {
    if (!selected(mask, k)) continue;
    const auto& target = gt.channels[k];
    const Eigen::Vector2d p = pred.points.row(k).transpose();
    if (!pred.available[k] || !inside_image(p, image)) {
      sum += target.square().sum();
      continue;
    }
    const auto g = profile(p, image, config);
    const MaskData rendered = (g.gy.matrix() * g.gx.matrix().transpose()).array();
    const MaskData residual = rendered - target;
    sum += residual.square().sum();
    // d rendered / d hx = rendered * dx / sigma2 (dx = centre - hx), same for y.
    const MaskData weighted = residual * rendered;
    const double g_hx = 2.0 * (weighted.rowwise() * g.dx.transpose()).sum() / config.sigma2;
    const double g_hy = 2.0 * (weighted.colwise() * g.dy).sum() / config.sigma2;
    grad(k, 0) = norm * g_hx * to_hx;
    grad(k, 1) = norm * g_hy * to_hy;
  }
  return sum * norm;
}

}  // namespace hamr
