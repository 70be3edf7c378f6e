#pragma once

#include "layersep/geometry.hpp"
#include "layersep/joint_case.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace layersep {

inline constexpr double kNormalJswMm = 1.75;
inline constexpr int kNumScoreBins = 5;

/// 0 for ratio >= 1, then one step per quarter of the normal width; a ratio
/// on a boundary takes the milder score.
int svdh_like_score(double jsw_mm, double normal_jsw_mm = kNormalJswMm);

struct JswAnnotation {
  double jsw_mm = 0.0;
  double pixel_spacing_mm = kDefaultPixelSpacingMm;
  Eigen::Vector2d axis = default_joint_axis();
  int svdh_like = 0;

  /// Derives the score; throws ValidationError on invalid inputs.
  static JswAnnotation make(double jsw_mm, double pixel_spacing_mm, const Eigen::Vector2d& axis);
  double jsw_px() const { return jsw_mm / pixel_spacing_mm; }
  void validate() const;
};

/// Change in joint width produced by a shift: the upper bone's displacement
/// minus the lower bone's, projected on the axis, in millimetres.
double displacement_difference_mm(const ShiftParams& shift, double pixel_spacing_mm, const Eigen::Vector2d& axis);

/// Symmetric translation that moves the joint from current to target width.
ShiftParams jsw_to_shift(double current_jsw_mm, double target_jsw_mm, double pixel_spacing_mm,
                         const Eigen::Vector2d& axis);

/// Shifts bone layers and recomposes, clamped to [0, 1].
Image synthesize(const LayerStack& stack, const ShiftParams& t_star);

/// True when every bone's shift lies inside the range.
bool within_range(const ShiftParams& shift, const ShiftRange& range);

/// Default range for synthesis; separate from the training shift range.
ShiftRange default_synthesis_range();

struct SynthesisPlan {
  std::string source_id;
  ShiftParams shift;
  double target_jsw_mm = 0.0;
  JswAnnotation annotation;
};

struct SynthesisSource {
  std::string id;
  LayerStack stack;
  double jsw_mm = 0.0;
  double pixel_spacing_mm = kDefaultPixelSpacingMm;
  Eigen::Vector2d axis = default_joint_axis();
};

/// Plan moving a source to a target width. Throws ValidationError when the
/// target is negative or the shift leaves the range.
SynthesisPlan plan_for_target(const SynthesisSource& source, double target_jsw_mm, const ShiftRange& range);

struct SynthesizedCase {
  std::string id;
  Image image;
  std::vector<Mask> masks;  ///< shifted {lower, upper}
  SynthesisPlan plan;
};

/// Relative weights per score bin, 0 to 4.
using BinWeights = std::array<double, kNumScoreBins>;

/// Width interval [lo, hi) in millimetres sampled for a bin. The open top of
/// bin 0 is capped at 1.25 x normal.
std::pair<double, double> bin_interval_mm(int bin, double normal_jsw_mm = kNormalJswMm);

/// per_source outputs per source; bins receive largest-remainder quotas of
/// the total under `distribution`, shuffled across outputs, then a width is
/// drawn inside the bin and the part reachable within `range`.
std::vector<SynthesisPlan> plan_balanced_dataset(std::span<const SynthesisSource> sources, int per_source,
                                                 const BinWeights& distribution, std::uint64_t seed,
                                                 const ShiftRange& range = default_synthesis_range());

std::vector<SynthesizedCase> generate_balanced_dataset(std::span<const SynthesisSource> sources, int per_source,
                                                       const BinWeights& distribution, std::uint64_t seed,
                                                       const ShiftRange& range = default_synthesis_range(),
                                                       int jobs = 1);

}  // namespace layersep
