#pragma once

#include "layersep/image.hpp"
#include "layersep/phantom.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace layersep {

inline constexpr double kPsnrCapDb = 100.0;

double mse(const Image& a, const Image& b);
/// Peak value 1; identical images report kPsnrCapDb.
double psnr(const Image& a, const Image& b);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean SSIM over all fully contained Gaussian windows. Images smaller than
/// the window are rejected.
double ssim(const Image& a, const Image& b, const SsimOptions& options = {});

struct ImageMetrics {
  double mse = 0.0;
  double ssim = 0.0;
  double psnr_db = 0.0;
};

ImageMetrics compare_images(const Image& a, const Image& b);

struct MetricEntry {
  std::string id;
  std::string group;
  ImageMetrics metrics;
};

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation; 0 for a single case
};

struct MetricAggregate {
  std::size_t count = 0;
  MetricSummary mse, ssim, psnr_db;
};

class MetricReport {
 public:
  void add(MetricEntry entry) { entries_.push_back(std::move(entry)); }
  const std::vector<MetricEntry>& entries() const { return entries_; }

  /// Aggregate over one group, or over every entry when group is empty.
  MetricAggregate aggregate(const std::string& group = "") const;
  std::vector<std::string> groups() const;

  nlohmann::ordered_json to_json() const;
  /// One row per group plus "all": mean +- std for MSE, SSIM, PSNR.
  std::string to_table() const;

 private:
  std::vector<MetricEntry> entries_;
};

struct SeparationEvaluation {
  ImageMetrics reconstruction;            ///< reconstruct(predicted) vs composed
  std::vector<ImageMetrics> layers;       ///< per layer vs gt
  std::vector<double> layer_rmse;
};

SeparationEvaluation evaluate_separation(const LayerStack& predicted, const Phantom& phantom);

nlohmann::ordered_json to_json(const SeparationEvaluation& e);

}  // namespace layersep
