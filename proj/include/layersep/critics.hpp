#pragma once

// Critics score a separation from outside the generator. A supervision critic
// looks at the reconstruction of the shifted stack, a shadow critic at the
// soft-tissue layer alone. Both return a loss the generator minimises and its
// gradient with respect to the image they were shown.

#include "layersep/image.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace layersep {

enum class CriticRole { Supervision, Shadow };

struct CriticInput {
  const Image* image = nullptr;
  /// Bone masks {lower, upper} before and after the shift. For the shadow
  /// role both spans hold the unshifted masks.
  std::span<const Mask> pre_masks;
  std::span<const Mask> post_masks;
};

struct CriticOutput {
  double loss = 0.0;
  Image gradient;
};

/// A labelled example for critic training.
struct CriticSample {
  Image image;
  std::vector<Mask> bone_masks;  ///< {lower, upper}
  double weight = 1.0;
};

class Critic {
 public:
  virtual ~Critic() = default;
  virtual CriticRole role() const = 0;
  virtual std::string name() const = 0;
  virtual CriticOutput evaluate(const CriticInput& input) const = 0;
  virtual bool trainable() const { return false; }
  /// One step on the critic's own objective (weighted mean over samples).
  /// Returns the objective before the step.
  virtual double train_step(std::span<const CriticSample> samples, double lr);
};

/// Squared differences of mean and variance between two pixel sets of x,
/// with the gradient w.r.t. x.
CriticOutput region_statistic_penalty(const Image& x, const Mask& inside, const Mask& ring);

/// Penalises L0 whose statistics inside the bone union differ from a band
/// around it: a residual bone shadow shows up as a brighter interior.
class ShadowStatisticCritic final : public Critic {
 public:
  explicit ShadowStatisticCritic(int ring_radius = 3) : ring_radius_(ring_radius) {}
  CriticRole role() const override { return CriticRole::Shadow; }
  std::string name() const override { return "shadow_statistic"; }
  CriticOutput evaluate(const CriticInput& input) const override;

 private:
  int ring_radius_;
};

/// Looks at R' where a bone used to be and no longer is. A correct
/// separation leaves only soft tissue there, statistically like its
/// surroundings.
class VacatedRegionCritic final : public Critic {
 public:
  explicit VacatedRegionCritic(int ring_radius = 3) : ring_radius_(ring_radius) {}
  CriticRole role() const override { return CriticRole::Supervision; }
  std::string name() const override { return "vacated_region"; }
  CriticOutput evaluate(const CriticInput& input) const override;

 private:
  int ring_radius_;
};

/// Per-pixel logistic model on local intensity features. Channels produce
/// independent probabilities.
class LogisticPixelModel {
 public:
  LogisticPixelModel(int channels, bool positional, std::uint64_t seed);

  int channels() const { return static_cast<int>(weights_.rows()); }
  Eigen::Index feature_count() const { return weights_.cols(); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  void set_weights(const Eigen::MatrixXd& w);

  std::vector<Image> features(const Image& x) const;
  std::vector<Image> logits(const std::vector<Image>& features) const;
  std::vector<Image> predict(const Image& x) const;
  /// Adjoint of the map x -> logits, applied to per-channel logit gradients.
  Image input_gradient(std::span<const Image> logit_grads) const;
  /// d loss / d W given per-channel logit gradients.
  Eigen::MatrixXd weight_gradient(const std::vector<Image>& features,
                                  std::span<const Image> logit_grads) const;
  void adam_step(const Eigen::MatrixXd& grad, double lr);

 private:
  bool positional_;
  Eigen::MatrixXd weights_;
  Eigen::MatrixXd m_, v_;
  long step_ = 0;
};

/// Three-channel segmenter {soft tissue, lower only, upper only}; stands in
/// for a trained segmentation network.
class LogisticSegmentationCritic final : public Critic {
 public:
  explicit LogisticSegmentationCritic(std::uint64_t seed = 0) : model_(kNumLayers, true, seed) {}
  CriticRole role() const override { return CriticRole::Supervision; }
  std::string name() const override { return "logistic_segmentation"; }
  CriticOutput evaluate(const CriticInput& input) const override;
  bool trainable() const override { return true; }
  double train_step(std::span<const CriticSample> samples, double lr) override;
  LogisticPixelModel& model() { return model_; }
  const LogisticPixelModel& model() const { return model_; }

 private:
  LogisticPixelModel model_;
};

/// Shadow discriminator: predicts the bone union from L0. The generator
/// sees max(0, 1 - BCE); the critic trains on plain BCE.
class LogisticShadowCritic final : public Critic {
 public:
  explicit LogisticShadowCritic(std::uint64_t seed = 0) : model_(1, false, seed) {}
  CriticRole role() const override { return CriticRole::Shadow; }
  std::string name() const override { return "logistic_shadow"; }
  CriticOutput evaluate(const CriticInput& input) const override;
  bool trainable() const override { return true; }
  double train_step(std::span<const CriticSample> samples, double lr) override;
  LogisticPixelModel& model() { return model_; }
  const LogisticPixelModel& model() const { return model_; }

 private:
  LogisticPixelModel model_;
};

std::unique_ptr<Critic> make_critic(const std::string& name, std::uint64_t seed = 0);

}  // namespace layersep
