#pragma once

#include <cstdint>
#include <string>

#include "hamr/fitter.hpp"

namespace hamr {

struct SynthConfig {
  double perturbation = 0.4;  // bound on |theta - theta*| per component, radians
  double shape_range = 1.0;   // bound on |beta| per component
  ImageSize image_size{128, 128};
  double fill = 0.75;         // longer side of the projected mesh over the shorter image side

  void validate() const;
};

/// A sample whose annotations are exact functions of a known state.
struct SynthSample {
  Sample sample;
  ParamState truth;
  Mesh mesh;
};

std::string synth_id(std::uint64_t seed, int index);

/// Root, knuckle and thumb joints get uniform rotations within the
/// perturbation box. The two distal joints of each non-thumb finger flex by
/// the same kind of angle about one hinge axis perpendicular to the finger and
/// the palm normal, so the generated fingers are planar and curl one way.
SynthSample synthesize(const HandModel& model, std::uint64_t seed, int index, const SynthConfig& config = {});

}  // namespace hamr
