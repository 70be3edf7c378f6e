#include "layersep/critics.hpp"

#include "layersep/filters.hpp"
#include "layersep/losses.hpp"
#include "layersep/rng.hpp"

#include <cmath>

namespace layersep {

namespace {

constexpr int kNearRadius = 1;
constexpr int kFarRadius = 4;

double pixel_mean(const Image& x, const Mask& m, Eigen::Index n) {
  return (x * m.cast<double>()).sum() / static_cast<double>(n);
}

Mask union_of(std::span<const Mask> masks, const Image& like) {
  if (masks.empty()) return empty_mask(like.rows(), like.cols());
  return mask_union(masks);
}

const Image& require_image(const CriticInput& input, const std::string& who) {
  if (input.image == nullptr) throw ValidationError(who + ": no input image");
  validate_image(*input.image, "critic input");
  return *input.image;
}

// d loss / d logit for a clamped BCE on logistic outputs.
Image logit_gradient(const Image& p, const Mask& target, double scale) {
  return scale * bce_gradient(p, target) * p * (1.0 - p);
}

}  // namespace

double Critic::train_step(std::span<const CriticSample>, double) {
  throw ValidationError("critic " + name() + " has no trainable parameters");
}

CriticOutput region_statistic_penalty(const Image& x, const Mask& inside, const Mask& ring) {
  CriticOutput out{0.0, Image::Zero(x.rows(), x.cols())};
  const Eigen::Index na = inside.count(), nb = ring.count();
  if (na == 0 || nb == 0) return out;
  const double mean_a = pixel_mean(x, inside, na), mean_b = pixel_mean(x, ring, nb);
  const Image da = (x - mean_a) * inside.cast<double>();
  const Image db = (x - mean_b) * ring.cast<double>();
  const double var_a = da.square().sum() / static_cast<double>(na);
  const double var_b = db.square().sum() / static_cast<double>(nb);
  const double dm = mean_a - mean_b, dv = var_a - var_b;
  out.loss = dm * dm + dv * dv;
  out.gradient = (2.0 * dm / static_cast<double>(na)) * inside.cast<double>() +
                 (4.0 * dv / static_cast<double>(na)) * da -
                 (2.0 * dm / static_cast<double>(nb)) * ring.cast<double>() -
                 (4.0 * dv / static_cast<double>(nb)) * db;
  return out;
}

CriticOutput ShadowStatisticCritic::evaluate(const CriticInput& input) const {
  const Image& x = require_image(input, name());
  const Mask bones = union_of(input.pre_masks, x);
  return region_statistic_penalty(x, bones, dilation_ring(bones, ring_radius_));
}

CriticOutput VacatedRegionCritic::evaluate(const CriticInput& input) const {
  const Image& x = require_image(input, name());
  const Mask before = union_of(input.pre_masks, x);
  const Mask after = union_of(input.post_masks, x);
  const Mask vacated = before && !after;
  const Mask ring = dilation_ring(vacated, ring_radius_) && !before && !after;
  return region_statistic_penalty(x, vacated, ring);
}

LogisticPixelModel::LogisticPixelModel(int channels, bool positional, std::uint64_t seed)
    : positional_(positional) {
  if (channels < 1) throw ValidationError("logistic model needs at least one channel");
  const Eigen::Index features = positional ? 6 : 4;
  weights_.resize(channels, features);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < weights_.size(); ++i) weights_.data()[i] = 0.01 * rng.normal();
  m_ = Eigen::MatrixXd::Zero(channels, features);
  v_ = Eigen::MatrixXd::Zero(channels, features);
}

void LogisticPixelModel::set_weights(const Eigen::MatrixXd& w) {
  if (w.rows() != weights_.rows() || w.cols() != weights_.cols()) {
    throw ValidationError("logistic model: weight shape mismatch");
  }
  weights_ = w;
}

std::vector<Image> LogisticPixelModel::features(const Image& x) const {
  std::vector<Image> f{x, box_filter(x, kNearRadius), box_filter(x, kFarRadius)};
  if (positional_) {
    const Eigen::Index rows = x.rows(), cols = x.cols();
    Image row(rows, cols), col(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        row(r, c) = rows > 1 ? static_cast<double>(r) / static_cast<double>(rows - 1) : 0.0;
        col(r, c) = cols > 1 ? static_cast<double>(c) / static_cast<double>(cols - 1) : 0.0;
      }
    }
    f.push_back(std::move(row));
    f.push_back(std::move(col));
  }
  f.push_back(Image::Ones(x.rows(), x.cols()));
  return f;
}

std::vector<Image> LogisticPixelModel::logits(const std::vector<Image>& f) const {
  std::vector<Image> out;
  for (Eigen::Index c = 0; c < weights_.rows(); ++c) {
    Image z = Image::Zero(f[0].rows(), f[0].cols());
    for (Eigen::Index k = 0; k < weights_.cols(); ++k) z += weights_(c, k) * f[k];
    out.push_back(std::move(z));
  }
  return out;
}

std::vector<Image> LogisticPixelModel::predict(const Image& x) const {
  std::vector<Image> z = logits(features(x));
  for (auto& ch : z) ch = logistic(ch);
  return z;
}

Image LogisticPixelModel::input_gradient(std::span<const Image> logit_grads) const {
  Image g = Image::Zero(logit_grads[0].rows(), logit_grads[0].cols());
  for (Eigen::Index c = 0; c < weights_.rows(); ++c) {
    const Image& gc = logit_grads[c];
    // box_filter is self-adjoint, so the chain rule reuses it directly.
    g += weights_(c, 0) * gc + weights_(c, 1) * box_filter(gc, kNearRadius) +
         weights_(c, 2) * box_filter(gc, kFarRadius);
  }
  return g;
}

Eigen::MatrixXd LogisticPixelModel::weight_gradient(const std::vector<Image>& f,
                                                    std::span<const Image> logit_grads) const {
  Eigen::MatrixXd g(weights_.rows(), weights_.cols());
  for (Eigen::Index c = 0; c < weights_.rows(); ++c) {
    for (Eigen::Index k = 0; k < weights_.cols(); ++k) g(c, k) = (f[k] * logit_grads[c]).sum();
  }
  return g;
}

void LogisticPixelModel::adam_step(const Eigen::MatrixXd& grad, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++step_;
  m_ = b1 * m_ + (1.0 - b1) * grad;
  v_ = b2 * v_ + (1.0 - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  weights_.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
}

CriticOutput LogisticSegmentationCritic::evaluate(const CriticInput& input) const {
  const Image& x = require_image(input, name());
  if (input.post_masks.size() != kNumBones) throw ValidationError(name() + ": expected two bone masks");
  const auto targets = segmentation_targets(input.post_masks[0], input.post_masks[1]);
  const auto p = model_.predict(x);
  std::vector<Image> g;
  for (int c = 0; c < kNumLayers; ++c) g.push_back(logit_gradient(p[c], targets[c], 1.0 / kNumLayers));
  return {loss_l1(p, targets), model_.input_gradient(g)};
}

double LogisticSegmentationCritic::train_step(std::span<const CriticSample> samples, double lr) {
  if (samples.empty()) return 0.0;
  double total_weight = 0.0;
  for (const auto& s : samples) total_weight += s.weight;
  if (!(total_weight > 0.0)) throw ValidationError(name() + ": sample weights must be positive");
  double loss = 0.0;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(model_.channels(), model_.feature_count());
  for (const auto& s : samples) {
    if (s.bone_masks.size() != kNumBones) throw ValidationError(name() + ": expected two bone masks");
    const double w = s.weight / total_weight;
    const auto targets = segmentation_targets(s.bone_masks[0], s.bone_masks[1]);
    const auto f = model_.features(s.image);
    auto p = model_.logits(f);
    for (auto& ch : p) ch = logistic(ch);
    loss += w * loss_supervision(p, targets);
    std::vector<Image> g;
    for (int c = 0; c < kNumLayers; ++c) g.push_back(logit_gradient(p[c], targets[c], w / kNumLayers));
    grad += model_.weight_gradient(f, g);
  }
  model_.adam_step(grad, lr);
  return loss;
}

CriticOutput LogisticShadowCritic::evaluate(const CriticInput& input) const {
  const Image& x = require_image(input, name());
  const Mask bones = union_of(input.pre_masks, x);
  const Image p = model_.predict(x)[0];
  const double value = bce(p, bones);
  CriticOutput out{loss_l2(p, bones), Image::Zero(x.rows(), x.cols())};
  if (1.0 - value > 0.0) {
    const Image g = logit_gradient(p, bones, -1.0);
    out.gradient = model_.input_gradient(std::span<const Image>(&g, 1));
  }
  return out;
}

double LogisticShadowCritic::train_step(std::span<const CriticSample> samples, double lr) {
  if (samples.empty()) return 0.0;
  double total_weight = 0.0;
  for (const auto& s : samples) total_weight += s.weight;
  if (!(total_weight > 0.0)) throw ValidationError(name() + ": sample weights must be positive");
  double loss = 0.0;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(1, model_.feature_count());
  for (const auto& s : samples) {
    const double w = s.weight / total_weight;
    const Mask bones = union_of(s.bone_masks, s.image);
    const auto f = model_.features(s.image);
    const Image p = logistic(model_.logits(f)[0]);
    loss += w * loss_discriminator(p, bones);
    const Image g = logit_gradient(p, bones, w);
    grad += model_.weight_gradient(f, std::span<const Image>(&g, 1));
  }
  model_.adam_step(grad, lr);
  return loss;
}

std::unique_ptr<Critic> make_critic(const std::string& name, std::uint64_t seed) {
  if (name == "shadow_statistic") return std::make_unique<ShadowStatisticCritic>();
  if (name == "vacated_region") return std::make_unique<VacatedRegionCritic>();
  if (name == "logistic_segmentation") return std::make_unique<LogisticSegmentationCritic>(seed);
  if (name == "logistic_shadow") return std::make_unique<LogisticShadowCritic>(seed);
  throw ValidationError("unknown critic: " + name);
}

}  // namespace layersep
