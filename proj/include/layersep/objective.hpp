#pragma once

// Hybrid separation loss for one case and its gradient with respect to the
// layer model's parameters.

#include "layersep/critics.hpp"
#include "layersep/geometry.hpp"
#include "layersep/joint_case.hpp"
#include "layersep/layer_model.hpp"
#include "layersep/losses.hpp"

#include <vector>

namespace layersep {

/// Shifts drawn for one step: one for the supervision critic, one for the
/// shifted bone-GT comparison.
struct StepShifts {
  ShiftParams supervision = ShiftParams::identity();
  ShiftParams bone_gt = ShiftParams::identity();
};

struct ObjectiveResult {
  LossReport report;
  std::vector<Image> param_grads;  ///< empty when gradients were not requested
};

class SeparationObjective {
 public:
  /// Critics are borrowed and must outlive the objective. The bone-GT term
  /// requires c.bone_gt when the stage uses it.
  SeparationObjective(const JointCase& c, const LossWeights& weights, Stage stage,
                      const Critic& supervision, const Critic& shadow);

  ObjectiveResult evaluate(const LayerModel& model, const StepShifts& shifts,
                           bool with_gradient = true) const;
  /// Total loss only; used by finite-difference checks.
  double value(const LayerModel& model, const StepShifts& shifts) const;

  Stage stage() const { return stage_; }

 private:
  const JointCase& case_;
  LossWeights weights_;
  ComponentWeights active_;
  Stage stage_;
  const Critic& supervision_;
  const Critic& shadow_;
  std::vector<Mask> stack_masks_;
  std::vector<Mask> bone_masks_;
  Mask overlap_;
};

}  // namespace layersep
