#include "layersep/phantom.hpp"

#include "layersep/compositing.hpp"
#include "layersep/filters.hpp"
#include "layersep/rng.hpp"

#include <cmath>

namespace layersep {

namespace {

Image smooth_soft_tissue(const PhantomConfig& cfg, Rng& rng) {
  const double mid = 0.5 * (cfg.soft_min + cfg.soft_max);
  if (cfg.flat_soft) return Image::Constant(cfg.rows, cfg.cols, mid);
  Image field = Image::Zero(cfg.rows, cfg.cols);
  for (int k = 0; k < 4; ++k) {
    const double cr = rng.uniform(0.0, cfg.rows), cc = rng.uniform(0.0, cfg.cols);
    const double s = rng.uniform(10.0, 20.0), amp = rng.uniform(-1.0, 1.0);
    for (int r = 0; r < cfg.rows; ++r) {
      for (int c = 0; c < cfg.cols; ++c) {
        const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
        field(r, c) += amp * std::exp(-d2 / (2.0 * s * s));
      }
    }
  }
  const double lo = field.minCoeff(), hi = field.maxCoeff();
  const double span = hi - lo > 1e-12 ? hi - lo : 1.0;
  const double inset = 0.1 * (cfg.soft_max - cfg.soft_min);
  Image soft = (cfg.soft_min + inset) + (field - lo) / span * (cfg.soft_max - cfg.soft_min - 2.0 * inset);
  for (Eigen::Index i = 0; i < soft.size(); ++i) soft.data()[i] += cfg.noise_sigma * rng.normal();
  return soft.max(cfg.soft_min).min(cfg.soft_max);
}

// Vertical capsule running off the frame on one side. `tip` is the row of the
// rounded end on the centre column; `downward` bones extend to the last row.
Mask capsule(int rows, int cols, double center_col, double tip, double half_width, bool downward) {
  Mask m = empty_mask(rows, cols);
  if (half_width <= 0.0) return m;
  const double cap_row = downward ? tip + half_width : tip - half_width;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double dc = c - center_col;
      const bool shaft = downward ? r >= cap_row : r <= cap_row;
      const double dr = shaft ? 0.0 : r - cap_row;
      m(r, c) = dc * dc + dr * dr <= half_width * half_width;
    }
  }
  return m;
}

Image bone_texture(const Mask& mask, Rng& rng) {
  const Eigen::Index rows = mask.rows(), cols = mask.cols();
  Image noise(rows, cols);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = rng.normal();
  noise = gaussian_blur(noise, 1.5);
  const double sd = std::sqrt((noise - noise.mean()).square().mean());
  if (sd > 0.0) noise = (noise - noise.mean()) / sd;
  const double base = rng.uniform(0.3, 0.4);
  Image bone = base + 0.06 * noise;
  const Mask rim1 = inner_ring(mask);
  const Mask rim2 = inner_ring(mask && !rim1);
  bone += 0.25 * (rim1 || rim2).cast<double>();
  return bone.max(0.2).min(0.8) * mask.cast<double>();
}

}  // namespace

void PhantomConfig::validate() const {
  if (rows < 8 || cols < 8) throw ValidationError("phantom must be at least 8x8");
  if (gap_min > gap_max) throw ValidationError("phantom gap range is empty");
  if (half_width_min < 0.0 || half_width_min > half_width_max) throw ValidationError("invalid bone half-width range");
  if (!(soft_min >= 0.0 && soft_min < soft_max && soft_max < 1.0)) throw ValidationError("invalid soft tissue range");
  if (noise_sigma < 0.0) throw ValidationError("noise_sigma must be non-negative");
  if (!(pixel_spacing_mm > 0.0)) throw ValidationError("pixel spacing must be positive");
}

JointCase Phantom::to_joint_case() const {
  JointCase c;
  c.id = id;
  c.image = composed;
  c.lower = lower();
  c.upper = upper();
  c.pixel_spacing_mm = pixel_spacing_mm;
  c.jsw_mm = true_jsw_mm;
  c.kind = CaseKind::Phantom;
  c.layers = gt_stack;
  return c;
}

Phantom make_phantom(const PhantomConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Phantom p;
  p.id = "phantom_" + std::to_string(seed);
  p.seed = seed;
  p.config = config;
  p.pixel_spacing_mm = config.pixel_spacing_mm;

  const Image soft = smooth_soft_tissue(config, rng);
  const double half_width = rng.uniform(config.half_width_min, config.half_width_max);
  p.gap_px = std::round(rng.uniform(config.gap_min, config.gap_max));
  const double center_col = std::floor(config.cols / 2.0) + std::round(rng.uniform(-2.0, 2.0));
  // Tips sit on half-integer rows so mask edges fall exactly between pixels.
  const double lower_tip = std::floor(config.rows / 2.0 + p.gap_px / 2.0 + rng.uniform(-3.0, 3.0)) + 0.5;
  const double upper_tip = lower_tip - p.gap_px;
  p.true_jsw_mm = std::max(p.gap_px, 0.0) * config.pixel_spacing_mm;

  const Mask lower = capsule(config.rows, config.cols, center_col, lower_tip, half_width, true);
  const Mask upper = capsule(config.rows, config.cols, center_col, upper_tip, half_width, false);
  p.gt_stack.layers = {soft, bone_texture(lower, rng), bone_texture(upper, rng)};
  p.gt_stack.masks = {full_mask(config.rows, config.cols), lower, upper};
  p.composed = reconstruct(p.gt_stack);
  return p;
}

std::vector<Phantom> make_phantom_suite(const PhantomConfig& config, int n, std::uint64_t seed) {
  if (n < 0) throw ValidationError("phantom count must be non-negative");
  Rng master(seed);
  std::vector<Phantom> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    out.push_back(make_phantom(config, master.fork()));
    out.back().id = "phantom_" + std::to_string(k);
  }
  return out;
}

}  // namespace layersep
