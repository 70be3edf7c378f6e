#pragma once

#include "layersep/joint_case.hpp"

#include <vector>

namespace layersep {

enum class InitMode {
  /// Soft tissue from a Gaussian-smoothed copy of J; bones from J minus that.
  SmoothedImage,
  /// Soft tissue from J with the bone union harmonically filled; bones take
  /// the remaining transmission, split evenly where they overlap.
  HarmonicAttenuation,
};

struct InitOptions {
  InitMode mode = InitMode::HarmonicAttenuation;
  double blur_sigma = 8.0;
  double bone_floor = 0.01;
};

/// Directly parameterised per-image layer generator. Each layer i emits
/// L_i = logistic(param_i) * M_i, with M_0 the full frame.
class LayerModel {
 public:
  explicit LayerModel(const JointCase& c);

  /// Model started from the physically plausible decomposition of J.
  static LayerModel initialized(const JointCase& c, const InitOptions& options = {});

  std::vector<Image>& params() { return params_; }
  const std::vector<Image>& params() const { return params_; }
  const std::vector<Mask>& masks() const { return masks_; }
  Eigen::Index parameter_count() const;

  /// Sets parameters so that emit() reproduces `layers` inside the masks.
  void set_from_layers(const std::vector<Image>& layers);

  LayerStack emit() const;

  /// Pulls d loss / d L_i back to d loss / d param_i.
  std::vector<Image> chain_to_params(const std::vector<Image>& layer_grads) const;

 private:
  std::vector<Image> params_;
  std::vector<Mask> masks_;
};

inline LayerStack emit_layers(const LayerModel& model) { return model.emit(); }

/// Initial layer estimate for a case (before squashing).
std::vector<Image> initial_layers(const JointCase& c, const InitOptions& options);

}  // namespace layersep
