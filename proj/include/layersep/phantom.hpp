#pragma once

// Synthetic joints with known layers: smooth soft tissue and two vertical
// capsule bones meeting at a joint line.

#include "layersep/joint_case.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace layersep {

struct PhantomConfig {
  int rows = 64;
  int cols = 64;
  /// Signed joint gap along the centre column in pixels, drawn per phantom
  /// from [gap_min, gap_max] and rounded to an integer. Negative overlaps.
  double gap_min = -6.0;
  double gap_max = -2.0;
  /// Bone half-width range; 0 yields a phantom without bones.
  double half_width_min = 8.0;
  double half_width_max = 12.0;
  double soft_min = 0.05;
  double soft_max = 0.4;
  double noise_sigma = 0.005;
  /// Constant soft tissue (at the midpoint of the soft range), no noise.
  bool flat_soft = false;
  double pixel_spacing_mm = kDefaultPixelSpacingMm;

  void validate() const;
};

struct Phantom {
  std::string id;
  LayerStack gt_stack;  ///< {soft, lower, upper}
  Image composed;       ///< reconstruct(gt_stack)
  double pixel_spacing_mm = kDefaultPixelSpacingMm;
  double gap_px = 0.0;  ///< signed; negative when the bones overlap
  double true_jsw_mm = 0.0;
  std::uint64_t seed = 0;
  PhantomConfig config;

  const Mask& lower() const { return gt_stack.masks[kLowerBone]; }
  const Mask& upper() const { return gt_stack.masks[kUpperBone]; }
  JointCase to_joint_case() const;
};

Phantom make_phantom(const PhantomConfig& config, std::uint64_t seed);

/// n phantoms with seeds derived from `seed`; ids "phantom_<k>".
std::vector<Phantom> make_phantom_suite(const PhantomConfig& config, int n, std::uint64_t seed);

}  // namespace layersep
