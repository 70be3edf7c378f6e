#pragma once

#include "layersep/image.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace layersep {

/// Weights of the three training regimes.
struct LossWeights {
  // stage 2: alpha L0 + beta L1 + gamma L2
  double alpha = 0.6;
  double beta = 0.3;
  double gamma = 0.1;
  // stage 1, late epochs: alpha' L0 + beta' L1 + gamma' L2 + delta L3
  double alpha_p = 0.5;
  double beta_p = 0.2;
  double gamma_p = 0.2;
  double delta = 0.1;
  // stage 1, early epochs: alpha'' L0 + beta'' L1 + (delta' or delta) L3
  double alpha_pp = 1.0;
  double beta_pp = 0.4;
  double delta_p = 0.4;
  /// When false the early regime weighs L3 by delta, as the printed formula reads.
  bool early_l3_uses_delta_prime = true;

  void validate() const;
};

enum class Stage { Stage2, Stage1Late, Stage1Early };

const char* to_string(Stage stage);
Stage stage_from_string(const std::string& name);

/// Per-regime coefficients; zero marks an inactive component.
struct ComponentWeights {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
};

ComponentWeights hybrid_weights(const LossWeights& weights, Stage stage);

struct LossComponents {
  double l0 = 0.0;
  std::optional<double> l1, l2, l3;
};

struct LossReport {
  Stage stage = Stage::Stage2;
  double l0 = 0.0;
  std::optional<double> l1, l2, l3;
  double total = 0.0;
};

/// Probability clamp applied to every BCE input.
inline constexpr double kProbabilityEpsilon = 1e-7;

/// Denominator floor for the RMSE gradient; keeps it bounded at R == J.
inline constexpr double kRmseGradientFloor = 1e-10;

/// sqrt(mean over support of (y - y_hat)^2). Support must be non-empty.
double rmse(const Image& y, const Image& y_hat, const Mask* support = nullptr);
/// d rmse / d y.
Image rmse_gradient(const Image& y, const Image& y_hat, const Mask* support = nullptr);

/// Mean of -[t log y + (1 - t) log(1 - y)] with y clamped to [eps, 1 - eps].
double bce(const Image& y, const Mask& target, const Mask* support = nullptr);
/// d bce / d y (zero where the clamp is active).
Image bce_gradient(const Image& y, const Mask& target, const Mask* support = nullptr);

/// Unweighted mean of per-channel BCE.
double bce_channels(std::span<const Image> y, std::span<const Mask> targets);

/// Three-channel segmentation target: {soft tissue, lower minus overlap,
/// upper minus overlap}. Soft tissue is everything outside the bone union.
std::vector<Mask> segmentation_targets(const Mask& lower, const Mask& upper);

/// rmse(R, J) + rmse over the bone overlap (0 when the overlap is empty).
double loss_l0(const Image& reconstruction, const Image& target, const Mask& overlap);
Image loss_l0_gradient(const Image& reconstruction, const Image& target, const Mask& overlap);

double loss_l1(std::span<const Image> segmentation, std::span<const Mask> targets);

/// Generator side of the shadow game: max(0, 1 - bce(D(L0), M_union)).
double loss_l2(const Image& shadow_probability, const Mask& bone_union);

/// Bone reconstructions against pseudo-image bone GT, compared over each
/// bone's support.
struct BoneComparison {
  std::vector<Image> predicted;
  std::vector<Image> target;
  std::vector<Mask> support;
};

/// RMSE over the concatenated supports of all bones.
double bone_rmse(const BoneComparison& cmp);
/// Gradient of bone_rmse w.r.t. each predicted image.
std::vector<Image> bone_rmse_gradient(const BoneComparison& cmp);

/// 0.5 * bone_rmse(unshifted) + 0.5 * bone_rmse(shifted).
double loss_l3(const BoneComparison& unshifted, const BoneComparison& shifted);

double loss_supervision(std::span<const Image> segmentation, std::span<const Mask> targets);
double loss_discriminator(const Image& shadow_probability, const Mask& bone_union);
double loss_preseg(std::span<const Image> seg_on_pseudo, std::span<const Mask> pseudo_targets,
                   std::span<const Image> seg_on_real, std::span<const Mask> real_targets);

/// Weighted sum of the components active in the stage. Missing active
/// components raise a ValidationError.
LossReport loss_hybrid(const LossComponents& components, const LossWeights& weights, Stage stage);

}  // namespace layersep
