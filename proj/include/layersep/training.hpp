#pragma once

// Two-stage schedule: stage 1 on pseudo-images with bone ground truth, an
// early regime without the shadow critic and a late regime with it; stage 2
// on pseudo and real images with the plain hybrid loss.

#include "layersep/critics.hpp"
#include "layersep/geometry.hpp"
#include "layersep/joint_case.hpp"
#include "layersep/layer_model.hpp"
#include "layersep/losses.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace layersep {

struct TrainConfig {
  double lr_g = 1e-4;
  double lr_s = 1e-4;
  double lr_d = 5e-4;
  int lr_halving_period = 100;  ///< epochs
  int stage1_epochs = 300;
  int stage1_switch_m = 200;
  int stage2_epochs = 100;
  int batch_size = 12;
  int image_size = 256;
  std::uint64_t seed = 0;
  LossWeights weights;
  ShiftRange shift_range;
  InitOptions init;
  /// Train the shadow critic on J in place of the segmentation critic
  /// for the supervision step (the formula's literal operand).
  bool literal_supervision_critic = false;

  void validate() const;
  /// Rate for a 1-based epoch counted across both stages.
  double rate(double base, int global_epoch) const;
};

struct EpochLog {
  int stage = 1;
  int epoch = 0;         ///< 1-based within the stage
  int global_epoch = 0;  ///< 1-based across stages
  Stage regime = Stage::Stage1Early;
  double lr_g = 0.0, lr_s = 0.0, lr_d = 0.0;
  double l0 = 0.0;
  std::optional<double> l1, l2, l3;
  double total = 0.0;
  std::optional<double> l_s;  ///< supervision critic objective
  std::optional<double> l_d;  ///< shadow critic objective
};

std::string to_json_line(const EpochLog& log);

struct TrainResult {
  std::vector<EpochLog> log;
  std::map<std::string, LayerStack> layers;  ///< by case id
  Eigen::MatrixXd segmentation_weights;
  Eigen::MatrixXd shadow_weights;
};

/// d1: pseudo-images carrying bone_gt; d2: d1 plus real cases. Each pseudo
/// case's source_id must name a non-overlap case in d2 (its real
/// counterpart for the supervision critic's stage-1 objective). When `log`
/// is given each epoch record is also written to it as a JSON line.
TrainResult train_two_stage(std::span<const JointCase> d1, std::span<const JointCase> d2,
                            const TrainConfig& config, std::ostream* log = nullptr);

}  // namespace layersep
