#include "layersep/losses.hpp"

#include "layersep/reduce.hpp"

#include <algorithm>
#include <cmath>

namespace layersep {

void LossWeights::validate() const {
  const double all[] = {alpha, beta, gamma, alpha_p, beta_p, gamma_p, delta, alpha_pp, beta_pp, delta_p};
  for (double w : all) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("loss weights must be finite and >= 0");
  }
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::Stage2: return "stage2";
    case Stage::Stage1Late: return "stage1_late";
    case Stage::Stage1Early: return "stage1_early";
  }
  return "unknown";
}

Stage stage_from_string(const std::string& name) {
  if (name == "stage2") return Stage::Stage2;
  if (name == "stage1_late") return Stage::Stage1Late;
  if (name == "stage1_early") return Stage::Stage1Early;
  throw ValidationError("unknown stage '" + name + "'");
}

ComponentWeights hybrid_weights(const LossWeights& w, Stage stage) {
  switch (stage) {
    case Stage::Stage2: return {w.alpha, w.beta, w.gamma, 0.0};
    case Stage::Stage1Late: return {w.alpha_p, w.beta_p, w.gamma_p, w.delta};
    case Stage::Stage1Early:
      return {w.alpha_pp, w.beta_pp, 0.0, w.early_l3_uses_delta_prime ? w.delta_p : w.delta};
  }
  return {};
}

namespace {

Eigen::Index support_count(const Image& y, const Mask* support) {
  if (!support) return y.size();
  require_same_shape(y, *support, "loss support");
  return support->count();
}

Image support_weights(const Image& y, const Mask* support) {
  return support ? Image(support->cast<double>()) : Image(Image::Ones(y.rows(), y.cols()));
}

}  // namespace

double rmse(const Image& y, const Image& y_hat, const Mask* support) {
  require_same_shape(y, y_hat, "rmse");
  const Eigen::Index n = support_count(y, support);
  if (n == 0) throw ValidationError("rmse: empty support");
  const Image sq = (y - y_hat).square() * support_weights(y, support);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(n));
}

Image rmse_gradient(const Image& y, const Image& y_hat, const Mask* support) {
  const Eigen::Index n = support_count(y, support);
  if (n == 0) throw ValidationError("rmse: empty support");
  const double value = rmse(y, y_hat, support);
  return (y - y_hat) * support_weights(y, support) /
         (static_cast<double>(n) * std::max(value, kRmseGradientFloor));
}

double bce(const Image& y, const Mask& target, const Mask* support) {
  require_same_shape(y, target, "bce");
  const Eigen::Index n = support_count(y, support);
  if (n == 0) throw ValidationError("bce: empty support");
  const Image p = y.max(kProbabilityEpsilon).min(1.0 - kProbabilityEpsilon);
  const Image t = target.cast<double>();
  const Image terms = -(t * p.log() + (1.0 - t) * (1.0 - p).log()) * support_weights(y, support);
  return pairwise_sum(terms) / static_cast<double>(n);
}

Image bce_gradient(const Image& y, const Mask& target, const Mask* support) {
  require_same_shape(y, target, "bce");
  const Eigen::Index n = support_count(y, support);
  if (n == 0) throw ValidationError("bce: empty support");
  const Image t = target.cast<double>();
  const Image active =
      ((y > kProbabilityEpsilon) && (y < 1.0 - kProbabilityEpsilon)).cast<double>();
  return (-t / y + (1.0 - t) / (1.0 - y)) * active * support_weights(y, support) /
         static_cast<double>(n);
}

double bce_channels(std::span<const Image> y, std::span<const Mask> targets) {
  if (y.empty() || y.size() != targets.size()) {
    throw ValidationError("bce_channels: channel count mismatch");
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < y.size(); ++c) acc += bce(y[c], targets[c]);
  return acc / static_cast<double>(y.size());
}

std::vector<Mask> segmentation_targets(const Mask& lower, const Mask& upper) {
  require_same_shape(lower, upper, "segmentation_targets");
  const Mask overlap = lower && upper;
  return {!(lower || upper), lower && !overlap, upper && !overlap};
}

double loss_l0(const Image& reconstruction, const Image& target, const Mask& overlap) {
  double value = rmse(reconstruction, target);
  if (overlap.any()) value += rmse(reconstruction, target, &overlap);
  return value;
}

Image loss_l0_gradient(const Image& reconstruction, const Image& target, const Mask& overlap) {
  Image grad = rmse_gradient(reconstruction, target);
  if (overlap.any()) grad += rmse_gradient(reconstruction, target, &overlap);
  return grad;
}

double loss_l1(std::span<const Image> segmentation, std::span<const Mask> targets) {
  return bce_channels(segmentation, targets);
}

double loss_l2(const Image& shadow_probability, const Mask& bone_union) {
  return std::max(0.0, 1.0 - bce(shadow_probability, bone_union));
}

namespace {

void check_comparison(const BoneComparison& cmp) {
  if (cmp.predicted.size() != cmp.target.size() || cmp.predicted.size() != cmp.support.size() ||
      cmp.predicted.empty()) {
    throw ValidationError("bone comparison: list sizes differ");
  }
}

}  // namespace

double bone_rmse(const BoneComparison& cmp) {
  check_comparison(cmp);
  double sum = 0.0;
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < cmp.predicted.size(); ++i) {
    require_same_shape(cmp.predicted[i], cmp.target[i], "bone_rmse");
    require_same_shape(cmp.predicted[i], cmp.support[i], "bone_rmse support");
    sum += pairwise_sum((cmp.predicted[i] - cmp.target[i]).square() * cmp.support[i].cast<double>());
    n += cmp.support[i].count();
  }
  if (n == 0) throw ValidationError("bone_rmse: empty support");
  return std::sqrt(sum / static_cast<double>(n));
}

std::vector<Image> bone_rmse_gradient(const BoneComparison& cmp) {
  const double value = bone_rmse(cmp);
  Eigen::Index n = 0;
  for (const auto& s : cmp.support) n += s.count();
  const double scale = 1.0 / (static_cast<double>(n) * std::max(value, kRmseGradientFloor));
  std::vector<Image> grads;
  grads.reserve(cmp.predicted.size());
  for (std::size_t i = 0; i < cmp.predicted.size(); ++i) {
    grads.push_back((cmp.predicted[i] - cmp.target[i]) * cmp.support[i].cast<double>() * scale);
  }
  return grads;
}

double loss_l3(const BoneComparison& unshifted, const BoneComparison& shifted) {
  return 0.5 * bone_rmse(unshifted) + 0.5 * bone_rmse(shifted);
}

double loss_supervision(std::span<const Image> segmentation, std::span<const Mask> targets) {
  return bce_channels(segmentation, targets);
}

double loss_discriminator(const Image& shadow_probability, const Mask& bone_union) {
  return bce(shadow_probability, bone_union);
}

double loss_preseg(std::span<const Image> seg_on_pseudo, std::span<const Mask> pseudo_targets,
                   std::span<const Image> seg_on_real, std::span<const Mask> real_targets) {
  return 0.5 * bce_channels(seg_on_pseudo, pseudo_targets) +
         0.5 * bce_channels(seg_on_real, real_targets);
}

LossReport loss_hybrid(const LossComponents& c, const LossWeights& weights, Stage stage) {
  weights.validate();
  const ComponentWeights w = hybrid_weights(weights, stage);
  auto need = [](const std::optional<double>& v, const char* name) {
    if (!v) throw ValidationError(std::string("loss_hybrid: missing component ") + name);
    return *v;
  };
  LossReport report;
  report.stage = stage;
  report.l0 = c.l0;
  report.l1 = need(c.l1, "l1");
  report.total = w.l0 * c.l0 + w.l1 * *report.l1;
  if (stage != Stage::Stage1Early) {
    report.l2 = need(c.l2, "l2");
    report.total += w.l2 * *report.l2;
  }
  if (stage != Stage::Stage2) {
    report.l3 = need(c.l3, "l3");
    report.total += w.l3 * *report.l3;
  }
  return report;
}

}  // namespace layersep
