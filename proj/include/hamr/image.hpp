#pragma once

#include <Eigen/Core>
#include <utility>

namespace hamr {

struct ImageSize {
  int height = 0;
  int width = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

using MaskData = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Single-channel image with values in [0, 1]. Row-major, origin top-left;
/// pixel (r, c) has its centre at (c + 0.5, r + 0.5).
struct Mask {
  MaskData data;

  Mask() = default;
  explicit Mask(MaskData d) : data(std::move(d)) {}
  Mask(int height, int width, double fill = 0.0) : data(MaskData::Constant(height, width, fill)) {}

  [[nodiscard]] int height() const { return static_cast<int>(data.rows()); }
  [[nodiscard]] int width() const { return static_cast<int>(data.cols()); }
  [[nodiscard]] ImageSize size() const { return {height(), width()}; }
};

}  // namespace hamr
