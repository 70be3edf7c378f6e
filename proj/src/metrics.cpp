#include "layersep/metrics.hpp"

#include "layersep/compositing.hpp"
#include "layersep/filters.hpp"
#include "layersep/reduce.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace layersep {

namespace {

// Valid-mode separable correlation with a symmetric kernel.
Image valid_filter(const Image& x, const Eigen::ArrayXd& k) {
  const Eigen::Index n = k.size();
  const Eigen::Index rows = x.rows() - n + 1, cols = x.cols() - n + 1;
  Image horizontal(x.rows(), cols);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double s = 0.0;
      for (Eigen::Index t = 0; t < n; ++t) s += k[t] * x(r, c + t);
      horizontal(r, c) = s;
    }
  }
  Image out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double s = 0.0;
      for (Eigen::Index t = 0; t < n; ++t) s += k[t] * horizontal(r + t, c);
      out(r, c) = s;
    }
  }
  return out;
}

MetricSummary summarize(const std::vector<double>& v) {
  MetricSummary s;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  s.mean = pairwise_sum(v.data(), v.size()) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

nlohmann::ordered_json summary_json(const MetricSummary& s) {
  return {{"mean", s.mean}, {"std", s.stddev}};
}

nlohmann::ordered_json metrics_json(const ImageMetrics& m) {
  return {{"mse", m.mse}, {"ssim", m.ssim}, {"psnr_db", m.psnr_db}};
}

std::string pm(const MetricSummary& s, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, s.mean, s.stddev);
  return buf;
}

}  // namespace

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  if (a.size() == 0) throw ValidationError("mse of empty images");
  return pairwise_sum((a - b).square()) / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / m));
}

double ssim(const Image& a, const Image& b, const SsimOptions& o) {
  require_same_shape(a, b, "ssim");
  if (o.window < 1 || o.window % 2 == 0) throw ValidationError("ssim window must be odd and positive");
  if (a.rows() < o.window || a.cols() < o.window) {
    throw ValidationError("ssim needs images of at least " + std::to_string(o.window) + " px per side");
  }
  const Eigen::ArrayXd k = gaussian_kernel(o.sigma, o.window / 2);
  const double c1 = (o.k1 * o.dynamic_range) * (o.k1 * o.dynamic_range);
  const double c2 = (o.k2 * o.dynamic_range) * (o.k2 * o.dynamic_range);
  const Image mu_a = valid_filter(a, k), mu_b = valid_filter(b, k);
  const Image var_a = valid_filter(a * a, k) - mu_a * mu_a;
  const Image var_b = valid_filter(b * b, k) - mu_b * mu_b;
  const Image cov = valid_filter(a * b, k) - mu_a * mu_b;
  const Image map = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                    ((mu_a.square() + mu_b.square() + c1) * (var_a + var_b + c2));
  return pairwise_sum(map) / static_cast<double>(map.size());
}

ImageMetrics compare_images(const Image& a, const Image& b) {
  return {mse(a, b), ssim(a, b), psnr(a, b)};
}

MetricAggregate MetricReport::aggregate(const std::string& group) const {
  std::vector<double> m, s, p;
  for (const auto& e : entries_) {
    if (!group.empty() && e.group != group) continue;
    m.push_back(e.metrics.mse);
    s.push_back(e.metrics.ssim);
    p.push_back(e.metrics.psnr_db);
  }
  return {m.size(), summarize(m), summarize(s), summarize(p)};
}

std::vector<std::string> MetricReport::groups() const {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (!e.group.empty() && seen.insert(e.group).second) out.push_back(e.group);
  }
  return out;
}

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["cases"] = nlohmann::ordered_json::array();
  for (const auto& e : entries_) {
    nlohmann::ordered_json c{{"id", e.id}, {"group", e.group}};
    c.update(metrics_json(e.metrics));
    j["cases"].push_back(std::move(c));
  }
  auto agg = [](const MetricAggregate& a) {
    return nlohmann::ordered_json{{"count", a.count},
                                  {"mse", summary_json(a.mse)},
                                  {"ssim", summary_json(a.ssim)},
                                  {"psnr_db", summary_json(a.psnr_db)}};
  };
  j["aggregate"]["all"] = agg(aggregate());
  for (const auto& g : groups()) j["aggregate"][g] = agg(aggregate(g));
  return j;
}

std::string MetricReport::to_table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %6s  %-24s %-20s %-20s\n", "group", "n", "MSE", "SSIM", "PSNR (dB)");
  out += line;
  auto row = [&](const std::string& name, const MetricAggregate& a) {
    std::snprintf(line, sizeof line, "%-16s %6zu  %-24s %-20s %-20s\n", name.c_str(), a.count,
                  pm(a.mse, "%.3e +- %.1e").c_str(), pm(a.ssim, "%.4f +- %.4f").c_str(),
                  pm(a.psnr_db, "%.2f +- %.2f").c_str());
    out += line;
  };
  for (const auto& g : groups()) row(g, aggregate(g));
  row("all", aggregate());
  return out;
}

SeparationEvaluation evaluate_separation(const LayerStack& predicted, const Phantom& phantom) {
  validate_stack(predicted);
  if (predicted.size() != phantom.gt_stack.size()) throw ValidationError("layer count differs from phantom");
  SeparationEvaluation e;
  e.reconstruction = compare_images(reconstruct(predicted), phantom.composed);
  for (int i = 0; i < predicted.size(); ++i) {
    e.layers.push_back(compare_images(predicted.layers[i], phantom.gt_stack.layers[i]));
    e.layer_rmse.push_back(std::sqrt(e.layers.back().mse));
  }
  return e;
}

nlohmann::ordered_json to_json(const SeparationEvaluation& e) {
  nlohmann::ordered_json j;
  j["reconstruction"] = metrics_json(e.reconstruction);
  j["layers"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < e.layers.size(); ++i) {
    auto l = metrics_json(e.layers[i]);
    l["rmse"] = e.layer_rmse[i];
    j["layers"].push_back(std::move(l));
  }
  return j;
}

}  // namespace layersep
