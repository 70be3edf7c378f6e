#include "layersep/objective.hpp"

#include "layersep/compositing.hpp"

namespace layersep {

namespace {

// One half of the bone-GT term: bone-only reconstructions against targets
// over each bone's support. Accumulates d/dL0 and d/dL_bone (scaled).
double bone_term(const Image& soft, std::span<const Image> bones, std::span<const Image> targets,
                 std::span<const Mask> supports, double scale, Image* soft_grad,
                 std::vector<Image>* bone_grads) {
  BoneComparison cmp;
  for (std::size_t b = 0; b < bones.size(); ++b) {
    cmp.predicted.push_back(apply_mask(reconstruct_pair(soft, bones[b]), supports[b]));
    cmp.target.push_back(targets[b]);
    cmp.support.push_back(supports[b]);
  }
  const double value = bone_rmse(cmp);
  if (soft_grad != nullptr) {
    const auto g = bone_rmse_gradient(cmp);
    for (std::size_t b = 0; b < bones.size(); ++b) {
      const Image gm = scale * g[b] * supports[b].cast<double>();
      *soft_grad += gm * (1.0 - bones[b]);
      (*bone_grads)[b] = gm * (1.0 - soft);
    }
  }
  return value;
}

}  // namespace

SeparationObjective::SeparationObjective(const JointCase& c, const LossWeights& weights, Stage stage,
                                         const Critic& supervision, const Critic& shadow)
    : case_(c),
      weights_(weights),
      active_(hybrid_weights(weights, stage)),
      stage_(stage),
      supervision_(supervision),
      shadow_(shadow),
      stack_masks_(c.stack_masks()),
      bone_masks_{c.lower, c.upper},
      overlap_(c.bone_overlap()) {
  weights_.validate();
  if (supervision.role() != CriticRole::Supervision) {
    throw ValidationError("critic " + supervision.name() + " cannot act as supervision critic");
  }
  if (shadow.role() != CriticRole::Shadow) {
    throw ValidationError("critic " + shadow.name() + " cannot act as shadow critic");
  }
  if (active_.l3 != 0.0) {
    if (!c.bone_gt || c.bone_gt->size() != kNumBones) {
      throw ValidationError("case " + c.id + " has no bone ground truth for stage " + to_string(stage));
    }
    for (const auto& b : *c.bone_gt) require_same_shape(c.image, b, "bone ground truth");
  }
}

ObjectiveResult SeparationObjective::evaluate(const LayerModel& model, const StepShifts& shifts,
                                              bool with_gradient) const {
  const LayerStack stack = model.emit();
  const std::vector<Image>& L = stack.layers;
  const Image R = reconstruct(stack);
  const auto rows = R.rows(), cols = R.cols();

  std::vector<Image> grads;
  if (with_gradient) grads.assign(kNumLayers, Image::Zero(rows, cols));

  LossComponents comp;
  comp.l0 = loss_l0(R, case_.image, overlap_);
  if (with_gradient) {
    const Image g = active_.l0 * loss_l0_gradient(R, case_.image, overlap_);
    for (int i = 0; i < kNumLayers; ++i) grads[i] += g * reconstruct_gradient(stack, i);
  }

  if (active_.l1 != 0.0) {
    const StackWarp sw = build_stack_warp(stack_masks_, shifts.supervision);
    std::vector<Image> shifted(kNumLayers);
    for (int i = 0; i < kNumLayers; ++i) shifted[i] = sw.apply(i, L[i]);
    const Image R_shift = reconstruct(std::span<const Image>(shifted));
    const std::vector<Mask> post{sw.shifted_masks[kLowerBone], sw.shifted_masks[kUpperBone]};
    const CriticOutput out = supervision_.evaluate({&R_shift, bone_masks_, post});
    comp.l1 = out.loss;
    if (with_gradient) {
      for (int i = 0; i < kNumLayers; ++i) {
        const Image gi = active_.l1 * out.gradient * reconstruct_gradient(std::span<const Image>(shifted), i);
        grads[i] += sw.pull_back(i, gi);
      }
    }
  }

  if (active_.l2 != 0.0) {
    const CriticOutput out = shadow_.evaluate({&L[kSoftTissue], bone_masks_, bone_masks_});
    comp.l2 = out.loss;
    if (with_gradient) grads[kSoftTissue] += active_.l2 * out.gradient;
  }

  if (active_.l3 != 0.0) {
    const std::vector<Image>& gt = *case_.bone_gt;
    const std::vector<Image> bones{L[kLowerBone], L[kUpperBone]};
    Image* soft_grad = with_gradient ? &grads[kSoftTissue] : nullptr;
    std::vector<Image> bone_grads(kNumBones);

    const double half = 0.5 * active_.l3;
    const double unshifted = bone_term(L[kSoftTissue], bones, gt, bone_masks_, half, soft_grad, &bone_grads);
    if (with_gradient) {
      for (int b = 0; b < kNumBones; ++b) grads[kLowerBone + b] += bone_grads[b];
    }

    // The same rigid shift moves both the predicted bones and their targets.
    const StackWarp sw = build_stack_warp(stack_masks_, shifts.bone_gt);
    std::vector<Image> moved, moved_gt;
    std::vector<Mask> moved_masks;
    for (int b = 0; b < kNumBones; ++b) {
      moved.push_back(sw.apply(kLowerBone + b, L[kLowerBone + b]));
      moved_gt.push_back(sw.apply(kLowerBone + b, gt[b]));
      moved_masks.push_back(sw.shifted_masks[kLowerBone + b]);
    }
    double shifted = unshifted;
    if (moved_masks[0].any() || moved_masks[1].any()) {
      shifted = bone_term(L[kSoftTissue], moved, moved_gt, moved_masks, half, soft_grad, &bone_grads);
      if (with_gradient) {
        for (int b = 0; b < kNumBones; ++b) grads[kLowerBone + b] += sw.pull_back(kLowerBone + b, bone_grads[b]);
      }
    } else if (with_gradient) {
      // Both bones left the frame: the unshifted term stands in for both halves.
      bone_term(L[kSoftTissue], bones, gt, bone_masks_, half, soft_grad, &bone_grads);
      for (int b = 0; b < kNumBones; ++b) grads[kLowerBone + b] += bone_grads[b];
    }
    comp.l3 = 0.5 * unshifted + 0.5 * shifted;
  }

  ObjectiveResult result{loss_hybrid(comp, weights_, stage_), {}};
  if (with_gradient) result.param_grads = model.chain_to_params(grads);
  return result;
}

double SeparationObjective::value(const LayerModel& model, const StepShifts& shifts) const {
  return evaluate(model, shifts, false).report.total;
}

}  // namespace layersep
