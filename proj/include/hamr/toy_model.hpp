#pragma once

#include <array>
#include <cstdint>

#include "hamr/model.hpp"

namespace hamr {

// Procedural stand-in for a licensed hand asset. Same structure as the real
// thing: 16 joints (wrist + 3 per finger), 10 shape components, 135 pose
// correctives. Units are meters; the hand lies in the xy-plane with fingers
// along +y and the palm normal along +z.
//
// Joint layout: 0 wrist, then thumb, index, middle, ring, pinky with three
// joints each (proximal to distal). The 21-point set appends the fingertips in
// the same finger order.
//
// Shape components (linear, per unit of beta):
//   0      uniform scale about the wrist, kToyScaleStep
//   1..5   finger length (thumb..pinky), kToyFingerLengthStep
//   6      palm width, 7 palm length, 8 palm thickness
//   9      finger radius
struct ToyHandConfig {
  // thumb..pinky, proximal to distal segment
  std::array<std::array<double, 3>, kNumFingertips> segment_lengths{{
      {0.040, 0.032, 0.028},
      {0.042, 0.026, 0.021},
      {0.047, 0.030, 0.023},
      {0.044, 0.028, 0.022},
      {0.035, 0.021, 0.019},
  }};
  double palm_width = 0.085;
  double palm_length = 0.090;
  double palm_thickness = 0.028;
  double finger_radius = 0.0085;
  int ring_resolution = 8;
  int rings_per_segment = 3;
  std::uint64_t seed = 0;
};

inline constexpr double kToyScaleStep = 0.08;
inline constexpr double kToyFingerLengthStep = 0.10;
inline constexpr double kToyPalmWidthStep = 0.08;
inline constexpr double kToyPalmLengthStep = 0.08;
inline constexpr double kToyPalmThicknessStep = 0.10;
inline constexpr double kToyFingerRadiusStep = 0.12;

/// Bounding-box growth of the rest mesh for the scale component alone.
constexpr double toy_scale_factor(double beta0) { return 1.0 + kToyScaleStep * beta0; }

/// Rest skeleton the builder places, K x 3.
JointPositions toy_skeleton(const ToyHandConfig& config);

HandModel build_toy_model(const ToyHandConfig& config = {});

}  // namespace hamr
