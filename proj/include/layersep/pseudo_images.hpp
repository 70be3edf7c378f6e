#pragma once

// Pseudo joint images: a non-overlap case whose bones are moved into overlap,
// recomposited under a harmonic brightness-correction field k, and spliced
// into the soft-tissue background.

#include "layersep/geometry.hpp"
#include "layersep/joint_case.hpp"
#include "layersep/laplace.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace layersep {

/// Scale about `center` followed by a translation, for one bone.
struct BonePlacement {
  double scale = 1.0;
  double dx = 0.0;
  double dy = 0.0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();

  Transform transform() const { return make_scale_translation(scale, dx, dy); }
};

/// bones[0] places the lower bone, bones[1] the upper bone.
using Placement = std::array<BonePlacement, kNumBones>;

struct PseudoOptions {
  double scale_min = 0.95;
  double scale_max = 1.05;
  double overlap_min = 0.02;  ///< band on |M'1 & M'2| / min(|M'1|, |M'2|)
  double overlap_max = 0.35;
  double lateral_jitter_px = 2.0;
  /// Extra closure beyond contact, as a fraction of the smaller image side.
  double max_depth_fraction = 0.25;
  int max_attempts = 400;
  LaplaceOptions laplace;
  /// Use the printed formula (1 - k prod(1 - B)) + J' * union everywhere
  /// instead of splicing the composite into the bone union only.
  bool literal_formula = false;
};

struct PseudoCase {
  std::string id;
  std::string source_id;
  Image image;                 ///< the pseudo-image
  std::vector<Image> bone_gt;  ///< B_i: placed bone regions with soft-tissue texture
  std::vector<Mask> masks;     ///< placed masks {lower, upper}
  Image k_field;               ///< correction field, defined on the bone union
  Image placed;                ///< J': background outside, placed bones inside
  Image background;            ///< source with its bone union harmonically filled
  Placement placement;
  double solver_residual = 0.0;
  int solver_iterations = 0;
  double overlap_fraction = 0.0;

  Mask bone_union() const { return masks[0] || masks[1]; }
  /// Converts to a trainable case carrying bone GT.
  JointCase to_joint_case(double pixel_spacing_mm, const Eigen::Vector2d& axis) const;
};

/// B_i = J' * M'_i for each mask.
std::vector<Image> extract_bone_regions(const Image& placed, std::span<const Mask> masks);

/// Harmonic k on the union with Dirichlet data on the outer ring:
/// k(p) = (1 - J'(p)) / prod_i (1 - P_i(p)) over the bones adjacent to p,
/// where P_i is bone i's source image (other bone filled with background)
/// under its placement, unmasked. Denominators are clamped at 1e-4.
LaplaceResult solve_k(const Image& placed, std::span<const Image> placed_sources,
                      std::span<const Mask> masks, const LaplaceOptions& options = {});

/// Builds one pseudo-image. Throws ValidationError when the source bones
/// already overlap or the placement yields no overlap.
PseudoCase compose_pseudo(const JointCase& source, const Placement& placement,
                          const PseudoOptions& options = {});

/// Draws placements until the overlap fraction lands inside the band.
Placement sample_placement(const JointCase& source, const PseudoOptions& options, Rng& rng);

/// Case k uses source k mod n with an independent stream derived from seed.
std::vector<PseudoCase> build_pseudo_dataset(std::span<const JointCase> sources, int count,
                                             std::uint64_t seed, const PseudoOptions& options = {},
                                             int jobs = 1);

struct SpliceContinuity {
  double outer = 0.0;  ///< max |J~ - J'| on the ring just outside the union
  double inner = 0.0;  ///< max |J~ - J'| on the ring just inside the union
};

SpliceContinuity splice_continuity(const PseudoCase& pc);

/// Throws ValidationError unless the bones overlap and k is harmonic
/// (max 5-point residual <= tolerance) inside the union.
void validate_pseudo_case(const PseudoCase& pc, double harmonic_tolerance = 1e-3);

}  // namespace layersep
