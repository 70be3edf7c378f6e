#include "layersep/training.hpp"

#include "layersep/objective.hpp"
#include "layersep/optimizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace layersep {

namespace {

struct CaseState {
  const JointCase* source = nullptr;
  LayerModel model;
  AdamOptimizer optimizer;
};

struct Accumulator {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0, total = 0.0, l_s = 0.0, l_d = 0.0;
  int n = 0, n_s = 0, n_d = 0;

  void add(const LossReport& r) {
    l0 += r.l0;
    l1 += r.l1.value_or(0.0);
    l2 += r.l2.value_or(0.0);
    l3 += r.l3.value_or(0.0);
    total += r.total;
    ++n;
  }
};

void require_size(const JointCase& c, int size) {
  if (c.image.rows() != size || c.image.cols() != size) {
    throw ValidationError("case " + c.id + " is " + std::to_string(c.image.rows()) + "x" +
                          std::to_string(c.image.cols()) + ", expected image_size " + std::to_string(size));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr_g > 0.0 && lr_s > 0.0 && lr_d > 0.0)) throw ValidationError("learning rates must be positive");
  if (lr_halving_period <= 0 || stage1_epochs <= 0 || stage1_switch_m <= 0 || stage2_epochs <= 0 ||
      batch_size <= 0 || image_size <= 0) {
    throw ValidationError("training schedule values must be positive");
  }
  if (stage1_switch_m >= stage1_epochs) throw ValidationError("stage1_switch_m must be below stage1_epochs");
  weights.validate();
  shift_range.validate();
}

double TrainConfig::rate(double base, int global_epoch) const {
  return base * std::ldexp(1.0, -((global_epoch - 1) / lr_halving_period));
}

std::string to_json_line(const EpochLog& e) {
  nlohmann::ordered_json j;
  j["stage"] = e.stage;
  j["epoch"] = e.epoch;
  j["global_epoch"] = e.global_epoch;
  j["regime"] = to_string(e.regime);
  j["lr_g"] = e.lr_g;
  j["lr_s"] = e.lr_s;
  j["lr_d"] = e.lr_d;
  j["l0"] = e.l0;
  if (e.l1) j["l1"] = *e.l1;
  if (e.l2) j["l2"] = *e.l2;
  if (e.l3) j["l3"] = *e.l3;
  j["total"] = e.total;
  if (e.l_s) j["l_s"] = *e.l_s;
  if (e.l_d) j["l_d"] = *e.l_d;
  return j.dump();
}

TrainResult train_two_stage(std::span<const JointCase> d1, std::span<const JointCase> d2,
                            const TrainConfig& config, std::ostream* log) {
  config.validate();
  if (d1.empty()) throw ValidationError("stage 1 dataset is empty");
  if (d2.empty()) throw ValidationError("stage 2 dataset is empty");

  std::map<std::string, const JointCase*> by_id;
  for (const auto& c : d2) {
    require_size(c, config.image_size);
    by_id[c.id] = &c;
  }
  std::map<std::string, CaseState> states;
  auto state_for = [&](const JointCase& c) -> CaseState& {
    auto it = states.find(c.id);
    if (it == states.end()) {
      it = states.emplace(c.id, CaseState{nullptr, LayerModel::initialized(c, config.init), AdamOptimizer()}).first;
    }
    return it->second;
  };
  for (const auto& c : d1) {
    require_size(c, config.image_size);
    if (!c.bone_gt) throw ValidationError("stage 1 case " + c.id + " has no bone ground truth");
    const auto src = by_id.find(c.source_id);
    if (src == by_id.end()) throw ValidationError("source of pseudo case " + c.id + " is not in stage 2 data");
    if (src->second->bone_overlap().any()) {
      throw ValidationError("source " + c.source_id + " of pseudo case " + c.id + " has overlapping bones");
    }
    state_for(c).source = src->second;
  }

  LogisticSegmentationCritic segmenter(config.seed ^ 0x5e9);
  LogisticShadowCritic discriminator(config.seed ^ 0xd15);
  Critic& supervision_trainee = config.literal_supervision_critic ? static_cast<Critic&>(discriminator)
                                                                   : static_cast<Critic&>(segmenter);
  Rng rng(config.seed);
  TrainResult result;
  int global_epoch = 0;

  auto run_stage = [&](int stage, std::span<const JointCase> cases, int epochs) {
    std::vector<std::size_t> order(cases.size());
    for (int epoch = 1; epoch <= epochs; ++epoch) {
      ++global_epoch;
      EpochLog entry;
      entry.stage = stage;
      entry.epoch = epoch;
      entry.global_epoch = global_epoch;
      entry.regime = stage == 2 ? Stage::Stage2
                     : epoch <= config.stage1_switch_m ? Stage::Stage1Early
                                                       : Stage::Stage1Late;
      entry.lr_g = config.rate(config.lr_g, global_epoch);
      entry.lr_s = config.rate(config.lr_s, global_epoch);
      entry.lr_d = config.rate(config.lr_d, global_epoch);
      const bool step_discriminator = entry.regime != Stage::Stage1Early;

      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

      Accumulator acc;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        std::vector<CriticSample> supervision_samples, shadow_samples;
        for (std::size_t k = start; k < stop; ++k) {
          const JointCase& c = cases[order[k]];
          CaseState& st = state_for(c);
          StepShifts shifts;
          shifts.supervision = sample_shift(config.shift_range, rng);
          shifts.bone_gt = sample_shift(config.shift_range, rng);
          const SeparationObjective objective(c, config.weights, entry.regime, segmenter, discriminator);
          const ObjectiveResult r = objective.evaluate(st.model, shifts);
          if (!std::isfinite(r.report.total)) {
            throw RuntimeFailure("non-finite loss in epoch " + std::to_string(global_epoch) + " on case " + c.id);
          }
          st.optimizer.step(st.model.params(), r.param_grads, entry.lr_g);
          acc.add(r.report);

          if (stage == 1) {
            supervision_samples.push_back({c.image, {c.lower, c.upper}, 0.5});
            supervision_samples.push_back({st.source->image, {st.source->lower, st.source->upper}, 0.5});
          } else {
            supervision_samples.push_back({c.image, {c.lower, c.upper}, 1.0});
          }
          if (step_discriminator) {
            shadow_samples.push_back({st.model.emit().layers[kSoftTissue], {c.lower, c.upper}, 1.0});
          }
        }
        acc.l_s += supervision_trainee.train_step(supervision_samples, entry.lr_s);
        ++acc.n_s;
        if (step_discriminator) {
          acc.l_d += discriminator.train_step(shadow_samples, entry.lr_d);
          ++acc.n_d;
        }
      }

      const ComponentWeights active = hybrid_weights(config.weights, entry.regime);
      const double n = static_cast<double>(acc.n);
      entry.l0 = acc.l0 / n;
      if (active.l1 != 0.0) entry.l1 = acc.l1 / n;
      if (active.l2 != 0.0) entry.l2 = acc.l2 / n;
      if (active.l3 != 0.0) entry.l3 = acc.l3 / n;
      entry.total = acc.total / n;
      entry.l_s = acc.l_s / acc.n_s;
      if (acc.n_d > 0) entry.l_d = acc.l_d / acc.n_d;
      if (log != nullptr) *log << to_json_line(entry) << '\n';
      result.log.push_back(entry);
    }
  };

  run_stage(1, d1, config.stage1_epochs);
  run_stage(2, d2, config.stage2_epochs);

  for (const auto& [id, st] : states) result.layers.emplace(id, st.model.emit());
  result.segmentation_weights = segmenter.model().weights();
  result.shadow_weights = discriminator.model().weights();
  return result;
}

}  // namespace layersep
