#include "layersep/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace layersep {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads keys from one JSON object into fields, tracking the path for errors.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  Reader& get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return *this;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: '" + path_ + "." + key + "' has the wrong type");
    }
    return *this;
  }

  template <typename F>
  Reader& section(const char* key, F&& read) {
    seen_.insert(key);
    if (j_.contains(key)) {
      Reader sub(j_.at(key), path_ + "." + key);
      read(sub);
      sub.done();
    }
    return *this;
  }

  void done() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError("config: unknown key '" + path_ + "." + key + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_weights(Reader& r, LossWeights& w) {
  r.get("alpha", w.alpha).get("beta", w.beta).get("gamma", w.gamma);
  r.get("alpha_p", w.alpha_p).get("beta_p", w.beta_p).get("gamma_p", w.gamma_p).get("delta", w.delta);
  r.get("alpha_pp", w.alpha_pp).get("beta_pp", w.beta_pp).get("delta_p", w.delta_p);
  r.get("early_l3_uses_delta_prime", w.early_l3_uses_delta_prime);
}

ordered_json weights_json(const LossWeights& w) {
  return {{"alpha", w.alpha},       {"beta", w.beta},       {"gamma", w.gamma},     {"alpha_p", w.alpha_p},
          {"beta_p", w.beta_p},     {"gamma_p", w.gamma_p}, {"delta", w.delta},     {"alpha_pp", w.alpha_pp},
          {"beta_pp", w.beta_pp},   {"delta_p", w.delta_p},
          {"early_l3_uses_delta_prime", w.early_l3_uses_delta_prime}};
}

void read_range(Reader& r, ShiftRange& s) {
  double theta_max_deg = degrees(s.theta_max);
  r.get("theta_max_deg", theta_max_deg).get("x_min", s.x_min).get("x_max", s.x_max);
  r.get("y_min", s.y_min).get("y_max", s.y_max);
  s.theta_max = radians(theta_max_deg);
}

ordered_json range_json(const ShiftRange& s) {
  return {{"theta_max_deg", degrees(s.theta_max)}, {"x_min", s.x_min}, {"x_max", s.x_max},
          {"y_min", s.y_min}, {"y_max", s.y_max}};
}

void read_init(Reader& r, InitOptions& o) {
  std::string mode = o.mode == InitMode::SmoothedImage ? "smoothed" : "harmonic";
  r.get("mode", mode).get("blur_sigma", o.blur_sigma).get("bone_floor", o.bone_floor);
  if (mode == "smoothed") {
    o.mode = InitMode::SmoothedImage;
  } else if (mode == "harmonic") {
    o.mode = InitMode::HarmonicAttenuation;
  } else {
    throw ValidationError("config: init.mode must be 'smoothed' or 'harmonic'");
  }
}

ordered_json init_json(const InitOptions& o) {
  return {{"mode", o.mode == InitMode::SmoothedImage ? "smoothed" : "harmonic"},
          {"blur_sigma", o.blur_sigma},
          {"bone_floor", o.bone_floor}};
}

void read_laplace(Reader& r, LaplaceOptions& o) {
  r.get("omega", o.omega).get("tolerance", o.tolerance).get("max_iterations", o.max_iterations);
}

}  // namespace

void AppConfig::propagate() {
  separation.seed = seed;
  train.seed = seed;
  train.weights = weights;
  train.shift_range = shift_range;
  train.init = init;
}

void AppConfig::validate() const {
  if (jobs < 1) throw ValidationError("config: jobs must be at least 1");
  weights.validate();
  shift_range.validate();
  separation.validate();
  train.validate();
  phantom.validate();
  synthesis.range.validate();
  if (synthesis.per_source < 0) throw ValidationError("config: synthesis.per_source must be non-negative");
  if (serve.port < 0 || serve.port > 65535) throw ValidationError("config: serve.port out of range");
}

AppConfig config_from_json(const json& j) {
  AppConfig c;
  Reader root(j, "$");
  root.get("seed", c.seed).get("jobs", c.jobs);
  root.section("loss_weights", [&](Reader& r) { read_weights(r, c.weights); });
  root.section("shift_range", [&](Reader& r) { read_range(r, c.shift_range); });
  root.section("init", [&](Reader& r) { read_init(r, c.init); });
  root.section("separation", [&](Reader& r) {
    std::string optimizer = to_string(c.separation.optimizer);
    std::string stage = to_string(c.separation.stage);
    r.get("steps", c.separation.steps).get("lr", c.separation.lr);
    r.get("lr_halving_steps", c.separation.lr_halving_steps).get("momentum", c.separation.momentum);
    r.get("optimizer", optimizer).get("stage", stage);
    c.separation.optimizer = optimizer_from_string(optimizer);
    c.separation.stage = stage_from_string(stage);
  });
  root.section("train", [&](Reader& r) {
    TrainConfig& t = c.train;
    r.get("lr_g", t.lr_g).get("lr_s", t.lr_s).get("lr_d", t.lr_d).get("lr_halving_period", t.lr_halving_period);
    r.get("stage1_epochs", t.stage1_epochs).get("stage1_switch_m", t.stage1_switch_m);
    r.get("stage2_epochs", t.stage2_epochs).get("batch_size", t.batch_size).get("image_size", t.image_size);
    r.get("literal_supervision_critic", t.literal_supervision_critic);
  });
  root.section("pseudo", [&](Reader& r) {
    PseudoOptions& p = c.pseudo;
    r.get("scale_min", p.scale_min).get("scale_max", p.scale_max);
    r.get("overlap_min", p.overlap_min).get("overlap_max", p.overlap_max);
    r.get("lateral_jitter_px", p.lateral_jitter_px).get("max_depth_fraction", p.max_depth_fraction);
    r.get("max_attempts", p.max_attempts).get("literal_formula", p.literal_formula);
    r.section("laplace", [&](Reader& l) { read_laplace(l, p.laplace); });
  });
  root.section("phantom", [&](Reader& r) {
    PhantomConfig& p = c.phantom;
    r.get("rows", p.rows).get("cols", p.cols).get("gap_min", p.gap_min).get("gap_max", p.gap_max);
    r.get("half_width_min", p.half_width_min).get("half_width_max", p.half_width_max);
    r.get("soft_min", p.soft_min).get("soft_max", p.soft_max).get("noise_sigma", p.noise_sigma);
    r.get("flat_soft", p.flat_soft).get("pixel_spacing_mm", p.pixel_spacing_mm);
  });
  root.section("synthesis", [&](Reader& r) {
    r.section("range", [&](Reader& s) { read_range(s, c.synthesis.range); });
    r.get("per_source", c.synthesis.per_source).get("distribution", c.synthesis.distribution);
  });
  root.section("serve", [&](Reader& r) {
    std::string annotations = c.serve.annotations.string();
    r.get("host", c.serve.host).get("port", c.serve.port).get("annotations", annotations);
    c.serve.annotations = annotations;
  });
  root.done();
  c.propagate();
  c.validate();
  return c;
}

ordered_json to_json(const AppConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["loss_weights"] = weights_json(c.weights);
  j["shift_range"] = range_json(c.shift_range);
  j["init"] = init_json(c.init);
  j["separation"] = {{"steps", c.separation.steps},
                     {"lr", c.separation.lr},
                     {"lr_halving_steps", c.separation.lr_halving_steps},
                     {"momentum", c.separation.momentum},
                     {"optimizer", to_string(c.separation.optimizer)},
                     {"stage", to_string(c.separation.stage)}};
  const TrainConfig& t = c.train;
  j["train"] = {{"lr_g", t.lr_g},
                {"lr_s", t.lr_s},
                {"lr_d", t.lr_d},
                {"lr_halving_period", t.lr_halving_period},
                {"stage1_epochs", t.stage1_epochs},
                {"stage1_switch_m", t.stage1_switch_m},
                {"stage2_epochs", t.stage2_epochs},
                {"batch_size", t.batch_size},
                {"image_size", t.image_size},
                {"literal_supervision_critic", t.literal_supervision_critic}};
  const PseudoOptions& p = c.pseudo;
  j["pseudo"] = {{"scale_min", p.scale_min},
                 {"scale_max", p.scale_max},
                 {"overlap_min", p.overlap_min},
                 {"overlap_max", p.overlap_max},
                 {"lateral_jitter_px", p.lateral_jitter_px},
                 {"max_depth_fraction", p.max_depth_fraction},
                 {"max_attempts", p.max_attempts},
                 {"literal_formula", p.literal_formula},
                 {"laplace",
                  {{"omega", p.laplace.omega},
                   {"tolerance", p.laplace.tolerance},
                   {"max_iterations", p.laplace.max_iterations}}}};
  const PhantomConfig& ph = c.phantom;
  j["phantom"] = {{"rows", ph.rows},
                  {"cols", ph.cols},
                  {"gap_min", ph.gap_min},
                  {"gap_max", ph.gap_max},
                  {"half_width_min", ph.half_width_min},
                  {"half_width_max", ph.half_width_max},
                  {"soft_min", ph.soft_min},
                  {"soft_max", ph.soft_max},
                  {"noise_sigma", ph.noise_sigma},
                  {"flat_soft", ph.flat_soft},
                  {"pixel_spacing_mm", ph.pixel_spacing_mm}};
  j["synthesis"] = {{"range", range_json(c.synthesis.range)},
                    {"per_source", c.synthesis.per_source},
                    {"distribution", c.synthesis.distribution}};
  j["serve"] = {{"host", c.serve.host}, {"port", c.serve.port}, {"annotations", c.serve.annotations.string()}};
  return j;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": malformed JSON (" + e.what() + ")");
  }
}

std::string config_hash(const AppConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace layersep
