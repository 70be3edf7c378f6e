#include "layersep/pseudo_images.hpp"

#include "layersep/measure.hpp"
#include "layersep/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace layersep {

JointCase PseudoCase::to_joint_case(double pixel_spacing_mm, const Eigen::Vector2d& axis) const {
  JointCase c;
  c.id = id;
  c.image = image;
  c.lower = masks[0];
  c.upper = masks[1];
  c.pixel_spacing_mm = pixel_spacing_mm;
  c.axis = axis;
  c.kind = CaseKind::Pseudo;
  c.source_id = source_id;
  c.bone_gt = bone_gt;
  return c;
}

std::vector<Image> extract_bone_regions(const Image& placed, std::span<const Mask> masks) {
  std::vector<Image> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(apply_mask(placed, m));
  return out;
}

LaplaceResult solve_k(const Image& placed, std::span<const Image> placed_sources,
                      std::span<const Mask> masks, const LaplaceOptions& options) {
  if (placed_sources.size() != masks.size() || masks.empty()) {
    throw ValidationError("solve_k: one placed source per mask required");
  }
  const Mask region = mask_union(masks);
  if (!region.any()) throw ValidationError("solve_k: empty bone union");
  const Mask ring = outer_ring(region);
  if (!ring.any()) throw ValidationError("solve_k: bone union has no boundary ring");

  std::vector<Mask> adjacent;
  adjacent.reserve(masks.size());
  for (const auto& m : masks) adjacent.push_back(outer_ring(m));

  Image boundary = Image::Ones(placed.rows(), placed.cols());
  for (Eigen::Index r = 0; r < placed.rows(); ++r) {
    for (Eigen::Index c = 0; c < placed.cols(); ++c) {
      if (!ring(r, c)) continue;
      double denom = 1.0;
      for (std::size_t i = 0; i < masks.size(); ++i) {
        if (adjacent[i](r, c)) denom *= 1.0 - placed_sources[i](r, c);
      }
      boundary(r, c) = (1.0 - placed(r, c)) / std::max(denom, 1e-4);
    }
  }
  return solve_laplace(boundary, region, options);
}

PseudoCase compose_pseudo(const JointCase& source, const Placement& placement,
                          const PseudoOptions& options) {
  validate_image(source.image, "pseudo source");
  require_same_shape(source.image, source.lower, "pseudo source lower mask");
  require_same_shape(source.image, source.upper, "pseudo source upper mask");
  if ((source.lower && source.upper).any()) {
    throw ValidationError("pseudo source " + source.id + " already has overlapping bones");
  }

  PseudoCase pc;
  pc.source_id = source.id;
  pc.placement = placement;
  pc.background = harmonic_inpaint(source.image, source.bone_union(), options.laplace);

  const Mask source_masks[kNumBones] = {source.lower, source.upper};
  std::vector<Image> placed_sources;
  // Nearest-neighbour placement for the k boundary data: a pixel the placed
  // mask leaves out then reads soft tissue, never a blend with the bone rim.
  std::vector<Image> ring_sources;
  for (int b = 0; b < kNumBones; ++b) {
    const BonePlacement& bp = placement[b];
    if (!(bp.scale > 0.0)) throw ValidationError("placement scale must be positive");
    const WarpOperator op = warp_operator(source.image.rows(), source.image.cols(), bp.transform(),
                                          Interpolation::Bilinear, bp.center, EdgeMode::Clamp);
    // The other bone is replaced by background so its texture does not travel along.
    const Mask& other = source_masks[1 - b];
    const Image own = other.select(pc.background, source.image);
    placed_sources.push_back(warp(own, op));
    ring_sources.push_back(warp(own, warp_operator(own.rows(), own.cols(), bp.transform(),
                                                   Interpolation::Nearest, bp.center, EdgeMode::Clamp)));
    pc.masks.push_back(warp_mask(source_masks[b], bp.transform(), bp.center, EdgeMode::Clamp));
  }

  const Mask overlap = pc.masks[0] && pc.masks[1];
  if (!overlap.any()) throw ValidationError("placement yields no bone overlap");
  pc.overlap_fraction = overlap_fraction(pc.masks[0], pc.masks[1]);
  const Mask region = pc.bone_union();

  // J': background outside, each bone's placed texture inside its mask, and
  // in the overlap the two bones composited with soft tissue counted once.
  pc.placed = pc.background;
  for (Eigen::Index i = 0; i < pc.placed.size(); ++i) {
    const bool in_lower = pc.masks[0].data()[i], in_upper = pc.masks[1].data()[i];
    const double p0 = placed_sources[0].data()[i], p1 = placed_sources[1].data()[i];
    if (in_lower && in_upper) {
      const double soft_t = std::max(1.0 - pc.background.data()[i], 1e-4);
      pc.placed.data()[i] = std::clamp(1.0 - (1.0 - p0) * (1.0 - p1) / soft_t, 0.0, 1.0);
    } else if (in_lower) {
      pc.placed.data()[i] = p0;
    } else if (in_upper) {
      pc.placed.data()[i] = p1;
    }
  }

  // B_i = J' * M'_i with J' taken per bone (the placed texture of that bone).
  for (int b = 0; b < kNumBones; ++b) pc.bone_gt.push_back(apply_mask(placed_sources[b], pc.masks[b]));

  const LaplaceResult k = solve_k(pc.placed, ring_sources, pc.masks, options.laplace);
  pc.solver_residual = k.max_residual;
  pc.solver_iterations = k.iterations;
  pc.k_field = k.solution;

  const Image bone_transmission = (1.0 - pc.bone_gt[0]) * (1.0 - pc.bone_gt[1]);
  const Image composite = 1.0 - pc.k_field * bone_transmission;
  const Image inside = region.cast<double>();
  if (options.literal_formula) {
    const Image k_full = inside * pc.k_field + (1.0 - inside) * (1.0 - pc.background);
    pc.image = (1.0 - k_full * bone_transmission + pc.placed * inside).max(0.0).min(1.0);
  } else {
    pc.image = (inside * composite + (1.0 - inside) * pc.background).max(0.0).min(1.0);
  }
  return pc;
}

Placement sample_placement(const JointCase& source, const PseudoOptions& options, Rng& rng) {
  const Eigen::Vector2d axis = source.axis.normalized();
  const Eigen::Vector2d lateral(-axis.y(), axis.x());
  const double gap = joint_gap_px(source.lower, source.upper, axis);
  if (gap < 0.0) throw ValidationError("pseudo source " + source.id + " has overlapping bones");
  const double max_depth =
      options.max_depth_fraction * static_cast<double>(std::min(source.image.rows(), source.image.cols()));
  const Eigen::Vector2d centers[kNumBones] = {centroid(source.lower), centroid(source.upper)};

  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    Placement p;
    const double closure = gap + rng.uniform(1.0, std::max(1.0, max_depth));
    const double split = rng.uniform(0.3, 0.7);
    const double along[kNumBones] = {closure * (1.0 - split), -closure * split};
    for (int b = 0; b < kNumBones; ++b) {
      const Eigen::Vector2d d = along[b] * axis +
                                rng.uniform(-options.lateral_jitter_px, options.lateral_jitter_px) * lateral;
      p[b].scale = rng.uniform(options.scale_min, options.scale_max);
      p[b].dx = d.x();
      p[b].dy = d.y();
      p[b].center = centers[b];
    }
    const Mask lower = warp_mask(source.lower, p[0].transform(), p[0].center, EdgeMode::Clamp);
    const Mask upper = warp_mask(source.upper, p[1].transform(), p[1].center, EdgeMode::Clamp);
    const double frac = overlap_fraction(lower, upper);
    if ((lower && upper).any() && frac >= options.overlap_min && frac <= options.overlap_max) return p;
  }
  throw RuntimeFailure("no placement within the overlap band for source " + source.id);
}

std::vector<PseudoCase> build_pseudo_dataset(std::span<const JointCase> sources, int count,
                                             std::uint64_t seed, const PseudoOptions& options,
                                             int jobs) {
  if (count < 0) throw ValidationError("pseudo dataset: negative count");
  if (count == 0) return {};
  if (sources.empty()) throw ValidationError("pseudo dataset: no source cases");
  for (const auto& s : sources) {
    if ((s.lower && s.upper).any()) {
      throw ValidationError("pseudo source " + s.id + " has overlapping bones");
    }
  }
  Rng master(seed);
  std::vector<std::uint64_t> seeds(count);
  for (auto& s : seeds) s = master.fork();

  std::vector<PseudoCase> out(count);
  parallel_for(count, jobs, [&](int k) {
    const JointCase& src = sources[static_cast<std::size_t>(k) % sources.size()];
    Rng rng(seeds[k]);
    const Placement placement = sample_placement(src, options, rng);
    out[k] = compose_pseudo(src, placement, options);
    out[k].id = "pseudo_" + std::to_string(k) + "_" + src.id;
  });
  return out;
}

SpliceContinuity splice_continuity(const PseudoCase& pc) {
  const Mask region = pc.bone_union();
  const Image diff = (pc.image - pc.placed).abs();
  SpliceContinuity s;
  const Mask out_ring = outer_ring(region), in_ring = inner_ring(region);
  if (out_ring.any()) s.outer = (diff * out_ring.cast<double>()).maxCoeff();
  if (in_ring.any()) s.inner = (diff * in_ring.cast<double>()).maxCoeff();
  return s;
}

void validate_pseudo_case(const PseudoCase& pc, double harmonic_tolerance) {
  if (pc.masks.size() != kNumBones) throw ValidationError("pseudo case: expected two bone masks");
  if (!(pc.masks[0] && pc.masks[1]).any()) throw ValidationError("pseudo case: bones do not overlap");
  validate_image(pc.image, "pseudo image");
  const double residual = max_laplace_residual(pc.k_field, pc.bone_union());
  if (residual > harmonic_tolerance) {
    throw ValidationError("pseudo case: k field is not harmonic (residual " +
                          std::to_string(residual) + ")");
  }
}

}  // namespace layersep
