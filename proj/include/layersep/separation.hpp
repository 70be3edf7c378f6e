#pragma once

#include "layersep/critics.hpp"
#include "layersep/geometry.hpp"
#include "layersep/layer_model.hpp"
#include "layersep/losses.hpp"
#include "layersep/optimizer.hpp"

#include <cstdint>
#include <vector>

namespace layersep {

struct SeparationOptions {
  int steps = 2000;
  /// Gradients are multiplied by the pixel count before the optimizer sees
  /// them, so a momentum rate does not depend on image size.
  double lr = 0.005;
  /// Halve lr every this many steps; 0 disables decay.
  int lr_halving_steps = 500;
  /// Adam by default: the RMSE reconstruction term has a kink at R == J,
  /// and a fixed-rate momentum step keeps kicking the iterate off it.
  OptimizerKind optimizer = OptimizerKind::Adam;
  double momentum = 0.9;  ///< used by OptimizerKind::Momentum only
  Stage stage = Stage::Stage2;
  std::uint64_t seed = 0;
  /// Reuse the first drawn shift for every step (testing aid).
  bool freeze_shift = false;

  void validate() const;
};

struct SeparationResult {
  LayerStack layers;
  std::vector<LossReport> history;  ///< one report per step, before the update
};

/// Fits the model to its case. Throws RuntimeFailure with the step index
/// when the loss stops being finite.
SeparationResult optimize_case(LayerModel& model, const JointCase& c, const Critic& supervision,
                               const Critic& shadow, const LossWeights& weights,
                               const ShiftRange& shift_range, const SeparationOptions& options);

/// Convenience: analytic critics, initialised model.
SeparationResult separate_case(const JointCase& c, const LossWeights& weights = {},
                               const ShiftRange& shift_range = {}, const SeparationOptions& options = {},
                               const InitOptions& init = {});

/// lr * 0.5^floor(index / period), index counted from 0.
double halved_rate(double base, int index, int period);

}  // namespace layersep
