#pragma once

// One JSON document configures every subcommand. Missing sections keep
// their defaults; unknown keys are rejected with their path.

#include "layersep/geometry.hpp"
#include "layersep/layer_model.hpp"
#include "layersep/losses.hpp"
#include "layersep/phantom.hpp"
#include "layersep/pseudo_images.hpp"
#include "layersep/separation.hpp"
#include "layersep/synthesis.hpp"
#include "layersep/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace layersep {

struct SynthesisConfig {
  ShiftRange range = default_synthesis_range();
  int per_source = 8;
  BinWeights distribution{1.0, 1.0, 1.0, 1.0, 1.0};
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path annotations = "annotations.jsonl";
};

struct AppConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  LossWeights weights;
  ShiftRange shift_range;
  InitOptions init;
  SeparationOptions separation;
  TrainConfig train;
  PseudoOptions pseudo;
  PhantomConfig phantom;
  SynthesisConfig synthesis;
  ServeConfig serve;

  /// Copies the shared sections (seed, weights, ranges, init) into the
  /// per-command structs.
  void propagate();
  void validate() const;
};

AppConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const AppConfig& c);
AppConfig load_config(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON dump, hex encoded.
std::string config_hash(const AppConfig& c);

}  // namespace layersep
