#include "layersep/synthesis.hpp"

#include "layersep/compositing.hpp"
#include "layersep/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace layersep {

namespace {

void check_axis(const Eigen::Vector2d& axis) {
  if (!axis.allFinite() || std::abs(axis.norm() - 1.0) > 1e-9) throw ValidationError("joint axis must be a unit vector");
}

void check_spacing(double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ValidationError("pixel spacing must be positive");
}

// Largest |d| (pixels of closure) a symmetric split can reach inside range.
double reachable_closure_px(const ShiftRange& range, const Eigen::Vector2d& axis) {
  double limit = std::numeric_limits<double>::infinity();
  const double bounds[2][2] = {{range.x_min, range.x_max}, {range.y_min, range.y_max}};
  for (int c = 0; c < 2; ++c) {
    const double a = std::abs(axis[c]);
    if (a < 1e-12) continue;
    const double half = std::min(std::abs(bounds[c][0]), std::abs(bounds[c][1]));
    if (bounds[c][0] > 0.0 || bounds[c][1] < 0.0) return 0.0;
    limit = std::min(limit, 2.0 * half / a);
  }
  return limit;
}

}  // namespace

int svdh_like_score(double jsw_mm, double normal_jsw_mm) {
  if (!(jsw_mm >= 0.0) || !std::isfinite(jsw_mm)) throw ValidationError("jsw_mm must be finite and non-negative");
  if (!(normal_jsw_mm > 0.0)) throw ValidationError("normal JSW must be positive");
  const double ratio = jsw_mm / normal_jsw_mm;
  if (ratio >= 1.0) return 0;
  if (ratio >= 0.75) return 1;
  if (ratio >= 0.5) return 2;
  if (ratio >= 0.25) return 3;
  return 4;
}

JswAnnotation JswAnnotation::make(double jsw_mm, double pixel_spacing_mm, const Eigen::Vector2d& axis) {
  JswAnnotation a{jsw_mm, pixel_spacing_mm, axis, 0};
  check_spacing(pixel_spacing_mm);
  check_axis(axis);
  a.svdh_like = svdh_like_score(jsw_mm);
  return a;
}

void JswAnnotation::validate() const {
  check_spacing(pixel_spacing_mm);
  check_axis(axis);
  if (!std::isfinite(jsw_px())) throw ValidationError("jsw_px is not finite");
  if (svdh_like != svdh_like_score(jsw_mm)) throw ValidationError("SvdH-like score disagrees with jsw_mm");
}

double displacement_difference_mm(const ShiftParams& shift, double pixel_spacing_mm, const Eigen::Vector2d& axis) {
  const RigidShift& lower = shift.for_layer(kLowerBone);
  const RigidShift& upper = shift.for_layer(kUpperBone);
  const Eigen::Vector2d diff(upper.dx - lower.dx, upper.dy - lower.dy);
  return diff.dot(axis) * pixel_spacing_mm;
}

ShiftParams jsw_to_shift(double current_jsw_mm, double target_jsw_mm, double pixel_spacing_mm,
                         const Eigen::Vector2d& axis) {
  if (!(target_jsw_mm >= 0.0)) throw ValidationError("target JSW must be non-negative");
  if (!std::isfinite(current_jsw_mm)) throw ValidationError("current JSW must be finite");
  check_spacing(pixel_spacing_mm);
  check_axis(axis);
  ShiftParams p = ShiftParams::identity();
  if (target_jsw_mm == current_jsw_mm) return p;
  const Eigen::Vector2d half = 0.5 * (target_jsw_mm - current_jsw_mm) / pixel_spacing_mm * axis;
  p.for_layer(kUpperBone) = {0.0, half.x(), half.y()};
  p.for_layer(kLowerBone) = {0.0, -half.x(), -half.y()};
  return p;
}

Image synthesize(const LayerStack& stack, const ShiftParams& t_star) {
  validate_stack(stack);
  const ShiftedStack shifted = shift_stack(stack, t_star);
  return reconstruct(shifted.stack).max(0.0).min(1.0);
}

bool within_range(const ShiftParams& shift, const ShiftRange& range) {
  for (const auto& b : shift.bones) {
    if (std::abs(b.theta) > range.theta_max) return false;
    if (b.dx < range.x_min || b.dx > range.x_max || b.dy < range.y_min || b.dy > range.y_max) return false;
  }
  return true;
}

ShiftRange default_synthesis_range() {
  ShiftRange r;
  r.theta_max = 0.0;
  r.x_min = r.y_min = -16.0;
  r.x_max = r.y_max = 16.0;
  return r;
}

SynthesisPlan plan_for_target(const SynthesisSource& source, double target_jsw_mm, const ShiftRange& range) {
  SynthesisPlan plan;
  plan.source_id = source.id;
  plan.target_jsw_mm = target_jsw_mm;
  plan.shift = jsw_to_shift(source.jsw_mm, target_jsw_mm, source.pixel_spacing_mm, source.axis);
  if (!within_range(plan.shift, range)) {
    throw ValidationError("target JSW " + std::to_string(target_jsw_mm) + " mm is out of shift range for " + source.id);
  }
  const double jsw = source.jsw_mm + displacement_difference_mm(plan.shift, source.pixel_spacing_mm, source.axis);
  plan.annotation = JswAnnotation::make(std::max(jsw, 0.0), source.pixel_spacing_mm, source.axis);
  return plan;
}

std::pair<double, double> bin_interval_mm(int bin, double normal_jsw_mm) {
  static constexpr double lo[kNumScoreBins] = {1.0, 0.75, 0.5, 0.25, 0.0};
  static constexpr double hi[kNumScoreBins] = {1.25, 1.0, 0.75, 0.5, 0.25};
  if (bin < 0 || bin >= kNumScoreBins) throw ValidationError("score bin out of range");
  return {lo[bin] * normal_jsw_mm, hi[bin] * normal_jsw_mm};
}

std::vector<SynthesisPlan> plan_balanced_dataset(std::span<const SynthesisSource> sources, int per_source,
                                                 const BinWeights& distribution, std::uint64_t seed,
                                                 const ShiftRange& range) {
  if (per_source < 0) throw ValidationError("per_source must be non-negative");
  range.validate();
  const double weight_sum = std::accumulate(distribution.begin(), distribution.end(), 0.0);
  for (double w : distribution) {
    if (!(w >= 0.0)) throw ValidationError("bin weights must be non-negative");
  }
  if (!(weight_sum > 0.0)) throw ValidationError("bin weights sum to zero");
  for (const auto& s : sources) {
    if (!(s.jsw_mm >= 0.0)) throw ValidationError("source " + s.id + " lacks a JSW annotation");
  }
  const std::size_t total = sources.size() * static_cast<std::size_t>(per_source);
  if (total == 0) return {};

  // Largest-remainder quotas.
  std::array<std::size_t, kNumScoreBins> quota{};
  std::array<double, kNumScoreBins> remainder{};
  std::size_t assigned = 0;
  for (int b = 0; b < kNumScoreBins; ++b) {
    const double exact = static_cast<double>(total) * distribution[b] / weight_sum;
    quota[b] = static_cast<std::size_t>(std::floor(exact));
    remainder[b] = exact - static_cast<double>(quota[b]);
    assigned += quota[b];
  }
  std::array<int, kNumScoreBins> by_remainder{0, 1, 2, 3, 4};
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++quota[by_remainder[i % kNumScoreBins]];

  std::vector<int> bins;
  bins.reserve(total);
  for (int b = 0; b < kNumScoreBins; ++b) bins.insert(bins.end(), quota[b], b);
  Rng rng(seed);
  for (std::size_t i = bins.size(); i > 1; --i) std::swap(bins[i - 1], bins[rng.below(i)]);

  std::vector<SynthesisPlan> plans;
  plans.reserve(total);
  for (std::size_t k = 0; k < total; ++k) {
    const SynthesisSource& src = sources[k / static_cast<std::size_t>(per_source)];
    auto [lo, hi] = bin_interval_mm(bins[k]);
    const double reach = reachable_closure_px(range, src.axis) * src.pixel_spacing_mm;
    lo = std::max(lo, src.jsw_mm - reach);
    hi = std::min(hi, src.jsw_mm + reach);
    // Keep clear of the bin edges so rounding cannot move the width across.
    const double margin = 1e-9 * kNormalJswMm;
    if (!(hi - lo > 2.0 * margin)) {
      throw RuntimeFailure("score bin " + std::to_string(bins[k]) + " is unreachable from source " + src.id);
    }
    const double target = rng.uniform(lo + margin, hi - margin);
    plans.push_back(plan_for_target(src, target, range));
  }
  return plans;
}

std::vector<SynthesizedCase> generate_balanced_dataset(std::span<const SynthesisSource> sources, int per_source,
                                                       const BinWeights& distribution, std::uint64_t seed,
                                                       const ShiftRange& range, int jobs) {
  const std::vector<SynthesisPlan> plans = plan_balanced_dataset(sources, per_source, distribution, seed, range);
  std::vector<SynthesizedCase> out(plans.size());
  parallel_for(static_cast<int>(plans.size()), jobs, [&](int k) {
    const SynthesisSource& src = sources[k / per_source];
    const ShiftedStack shifted = shift_stack(src.stack, plans[k].shift);
    SynthesizedCase& sc = out[k];
    sc.id = src.id + "_syn" + std::to_string(k % per_source);
    sc.image = reconstruct(shifted.stack).max(0.0).min(1.0);
    sc.masks = {shifted.stack.masks[kLowerBone], shifted.stack.masks[kUpperBone]};
    sc.plan = plans[k];
  });
  return out;
}

}  // namespace layersep
