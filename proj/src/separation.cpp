#include "layersep/separation.hpp"

#include "layersep/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace layersep {

void SeparationOptions::validate() const {
  if (steps < 0) throw ValidationError("steps must be non-negative");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("lr must be positive");
  if (lr_halving_steps < 0) throw ValidationError("lr_halving_steps must be non-negative");
}

double halved_rate(double base, int index, int period) {
  if (period <= 0) return base;
  return base * std::ldexp(1.0, -(index / period));
}

SeparationResult optimize_case(LayerModel& model, const JointCase& c, const Critic& supervision,
                               const Critic& shadow, const LossWeights& weights,
                               const ShiftRange& shift_range, const SeparationOptions& options) {
  options.validate();
  shift_range.validate();
  const SeparationObjective objective(c, weights, options.stage, supervision, shadow);
  const auto optimizer = make_optimizer(options.optimizer, options.momentum);
  const double pixels = static_cast<double>(c.image.size());
  Rng rng(options.seed);

  SeparationResult result;
  result.history.reserve(options.steps);
  StepShifts shifts;
  for (int step = 0; step < options.steps; ++step) {
    if (step == 0 || !options.freeze_shift) {
      shifts.supervision = sample_shift(shift_range, rng);
      shifts.bone_gt = sample_shift(shift_range, rng);
    }
    const bool params_finite =
        std::ranges::all_of(model.params(), [](const Image& p) { return p.allFinite(); });
    if (!params_finite) {
      throw RuntimeFailure("non-finite parameters at step " + std::to_string(step) + " of case " + c.id);
    }
    ObjectiveResult r = objective.evaluate(model, shifts);
    if (!std::isfinite(r.report.total)) {
      throw RuntimeFailure("non-finite loss at step " + std::to_string(step) + " of case " + c.id);
    }
    for (auto& g : r.param_grads) g *= pixels;
    optimizer->step(model.params(), r.param_grads, halved_rate(options.lr, step, options.lr_halving_steps));
    result.history.push_back(r.report);
  }
  result.layers = model.emit();
  return result;
}

SeparationResult separate_case(const JointCase& c, const LossWeights& weights, const ShiftRange& shift_range,
                               const SeparationOptions& options, const InitOptions& init) {
  LayerModel model = LayerModel::initialized(c, init);
  const VacatedRegionCritic supervision;
  const ShadowStatisticCritic shadow;
  return optimize_case(model, c, supervision, shadow, weights, shift_range, options);
}

}  // namespace layersep
