#include "layersep/cli.hpp"

#include "layersep/compositing.hpp"
#include "layersep/config.hpp"
#include "layersep/manifest.hpp"
#include "layersep/metrics.hpp"
#include "layersep/parallel.hpp"
#include "layersep/png_io.hpp"
#include "layersep/serve.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <optional>

namespace layersep {

namespace {

using nlohmann::ordered_json;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<int> jobs;
};

AppConfig resolve_config(const GlobalOptions& g) {
  AppConfig c = g.config_path.empty() ? AppConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (g.jobs) c.jobs = *g.jobs;
  c.propagate();
  c.validate();
  return c;
}

fs::path prepare_out(const GlobalOptions& g) {
  const fs::path out = g.out;
  fs::create_directories(out);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw RuntimeFailure("cannot write " + path.string());
  f << text;
  if (!f) throw RuntimeFailure("failed writing " + path.string());
}

std::vector<JointCase> load_cases(const std::string& manifest) {
  std::vector<JointCase> cases;
  for (const auto& r : load_manifest(manifest)) cases.push_back(load_case(r));
  return cases;
}

ordered_json report_json(const LossReport& r) {
  ordered_json j{{"stage", to_string(r.stage)}, {"l0", r.l0}};
  if (r.l1) j["l1"] = *r.l1;
  if (r.l2) j["l2"] = *r.l2;
  if (r.l3) j["l3"] = *r.l3;
  j["total"] = r.total;
  return j;
}

int cmd_phantom(const GlobalOptions& g, int count, std::ostream& out) {
  const AppConfig cfg = resolve_config(g);
  const fs::path dir = prepare_out(g);
  std::vector<CaseRecord> records;
  for (const auto& p : make_phantom_suite(cfg.phantom, count, cfg.seed)) {
    records.push_back(save_case(dir, p.to_joint_case()));
  }
  save_manifest(dir / "manifest.jsonl", records);
  out << "wrote " << records.size() << " phantoms to " << dir.string() << "\n";
  return 0;
}

int cmd_pseudo(const GlobalOptions& g, const std::string& manifest, int count, std::ostream& out) {
  const AppConfig cfg = resolve_config(g);
  std::vector<JointCase> sources;
  for (auto& c : load_cases(manifest)) {
    if (!c.bone_overlap().any()) sources.push_back(std::move(c));
  }
  if (sources.empty()) throw ValidationError("manifest has no non-overlap cases to build pseudo-images from");
  if (count < 0) count = static_cast<int>(sources.size());
  const fs::path dir = prepare_out(g);
  const auto pseudo = build_pseudo_dataset(sources, count, cfg.seed, cfg.pseudo, cfg.jobs);
  std::vector<CaseRecord> records;
  ordered_json diag = ordered_json::array();
  for (std::size_t k = 0; k < pseudo.size(); ++k) {
    const JointCase& src = sources[k % sources.size()];
    records.push_back(save_case(dir, pseudo[k].to_joint_case(src.pixel_spacing_mm, src.axis)));
    const SpliceContinuity s = splice_continuity(pseudo[k]);
    diag.push_back({{"id", pseudo[k].id},
                    {"source_id", pseudo[k].source_id},
                    {"overlap_fraction", pseudo[k].overlap_fraction},
                    {"solver_residual", pseudo[k].solver_residual},
                    {"solver_iterations", pseudo[k].solver_iterations},
                    {"continuity_outer", s.outer},
                    {"continuity_inner", s.inner}});
  }
  // Sources go alongside so the dataset is self-contained for training.
  for (const auto& src : sources) {
    JointCase copy = src;
    copy.layers.reset();
    records.push_back(save_case(dir / "sources", copy));
  }
  save_manifest(dir / "manifest.jsonl", records);
  write_text(dir / "pseudo_diagnostics.json", diag.dump(2) + "\n");
  out << "wrote " << pseudo.size() << " pseudo-images to " << dir.string() << "\n";
  return 0;
}

LayerStack separate_one(const JointCase& c, const AppConfig& cfg, const fs::path& dir, const std::string& hash) {
  const SeparationResult r = separate_case(c, cfg.weights, cfg.shift_range, cfg.separation, cfg.init);
  const auto layer_paths = save_layers(dir, c.id, r.layers);
  std::string history;
  for (const auto& h : r.history) history += report_json(h).dump() + "\n";
  write_text(dir / (c.id + "_history.jsonl"), history);
  ordered_json sidecar{{"case_id", c.id},
                       {"layers", {layer_paths[0].filename().string(), layer_paths[1].filename().string(),
                                   layer_paths[2].filename().string()}},
                       {"loss_history", c.id + "_history.jsonl"},
                       {"config_hash", hash},
                       {"seed", cfg.seed},
                       {"steps", cfg.separation.steps}};
  if (!r.history.empty()) sidecar["final"] = report_json(r.history.back());
  write_text(dir / (c.id + "_separation.json"), sidecar.dump(2) + "\n");
  return r.layers;
}

int cmd_separate(const GlobalOptions& g, const std::string& manifest, std::optional<int> steps, std::ostream& out) {
  AppConfig cfg = resolve_config(g);
  if (steps) cfg.separation.steps = *steps;
  cfg.validate();
  const auto records = load_manifest(manifest);
  const fs::path dir = prepare_out(g);
  const std::string hash = config_hash(cfg);
  std::vector<CaseRecord> updated(records.size());
  parallel_for(static_cast<int>(records.size()), cfg.jobs, [&](int i) {
    const JointCase c = load_case(records[i]);
    const LayerStack layers = separate_one(c, cfg, dir, hash);
    updated[i] = records[i];
    updated[i].layers = {dir / (c.id + "_layer0.png"), dir / (c.id + "_layer1.png"), dir / (c.id + "_layer2.png")};
  });
  save_manifest(dir / "manifest.jsonl", updated);
  out << "separated " << records.size() << " cases into " << dir.string() << "\n";
  return 0;
}

int cmd_train(const GlobalOptions& g, const std::string& pseudo_manifest, const std::string& extra_manifest,
              std::ostream& out) {
  const AppConfig cfg = resolve_config(g);
  const auto d1_records = load_manifest(pseudo_manifest);
  std::vector<JointCase> d1, d2;
  std::vector<CaseRecord> all_records;
  for (const auto& r : d1_records) {
    JointCase c = load_case(r);
    if (c.bone_gt) d1.push_back(c);
    d2.push_back(std::move(c));
    all_records.push_back(r);
  }
  if (!extra_manifest.empty()) {
    for (const auto& r : load_manifest(extra_manifest)) {
      d2.push_back(load_case(r));
      all_records.push_back(r);
    }
  }
  const fs::path dir = prepare_out(g);
  std::ofstream log(dir / "train_log.jsonl");
  if (!log) throw RuntimeFailure("cannot write training log");
  const TrainResult result = train_two_stage(d1, d2, cfg.train, &log);

  std::vector<CaseRecord> records;
  for (auto r : all_records) {
    const auto it = result.layers.find(r.id);
    if (it != result.layers.end()) r.layers = save_layers(dir, r.id, it->second);
    records.push_back(std::move(r));
  }
  save_manifest(dir / "manifest.jsonl", records);
  auto matrix_json = [](const Eigen::MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row(m.cols());
      for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
      rows.push_back(row);
    }
    return rows;
  };
  const ordered_json critics{{"segmentation", matrix_json(result.segmentation_weights)},
                             {"shadow", matrix_json(result.shadow_weights)},
                             {"config_hash", config_hash(cfg)},
                             {"seed", cfg.seed}};
  write_text(dir / "critics.json", critics.dump(2) + "\n");
  out << "trained " << result.log.size() << " epochs; log at " << (dir / "train_log.jsonl").string() << "\n";
  return 0;
}

int cmd_synthesize(const GlobalOptions& g, const std::string& manifest, std::optional<int> per_source,
                   std::ostream& out) {
  AppConfig cfg = resolve_config(g);
  if (per_source) cfg.synthesis.per_source = *per_source;
  cfg.validate();
  std::vector<SynthesisSource> sources;
  for (const auto& r : load_manifest(manifest)) {
    if (r.layers.empty()) throw ValidationError("case " + r.id + " has no separated layers");
    if (!r.jsw_mm) throw ValidationError("case " + r.id + " has no JSW annotation");
    const JointCase c = load_case(r);
    sources.push_back({c.id, *c.layers, *c.jsw_mm, c.pixel_spacing_mm, c.axis});
  }
  const fs::path dir = prepare_out(g);
  const auto synth = generate_balanced_dataset(sources, cfg.synthesis.per_source, cfg.synthesis.distribution,
                                               cfg.seed, cfg.synthesis.range, cfg.jobs);
  std::vector<CaseRecord> records;
  std::string annotations;
  for (const auto& sc : synth) {
    JointCase c;
    c.id = sc.id;
    c.image = sc.image;
    c.lower = sc.masks[0];
    c.upper = sc.masks[1];
    c.pixel_spacing_mm = sc.plan.annotation.pixel_spacing_mm;
    c.axis = sc.plan.annotation.axis;
    c.jsw_mm = sc.plan.annotation.jsw_mm;
    c.kind = CaseKind::Synthetic;
    c.source_id = sc.plan.source_id;
    records.push_back(save_case(dir, c));
    annotations += ordered_json{{"id", sc.id},
                                {"source_id", sc.plan.source_id},
                                {"jsw_mm", sc.plan.annotation.jsw_mm},
                                {"svdh_like", sc.plan.annotation.svdh_like},
                                {"shift", shifts_to_json(sc.plan.shift)},
                                {"pixel_spacing_mm", sc.plan.annotation.pixel_spacing_mm}}
                       .dump() +
                   "\n";
  }
  save_manifest(dir / "manifest.jsonl", records);
  write_text(dir / "annotations.jsonl", annotations);
  out << "synthesized " << synth.size() << " images into " << dir.string() << "\n";
  return 0;
}

int cmd_evaluate(const GlobalOptions& g, const std::string& manifest, std::optional<int> steps, std::ostream& out) {
  AppConfig cfg = resolve_config(g);
  if (steps) cfg.separation.steps = *steps;
  cfg.validate();
  const auto records = load_manifest(manifest);
  const fs::path dir = prepare_out(g);

  struct Row {
    ImageMetrics reconstruction;
    std::optional<SeparationEvaluation> layers;
  };
  std::vector<Row> rows(records.size());
  parallel_for(static_cast<int>(records.size()), cfg.jobs, [&](int i) {
    const JointCase c = load_case(records[i]);
    const LayerStack predicted =
        c.layers ? *c.layers : separate_case(c, cfg.weights, cfg.shift_range, cfg.separation, cfg.init).layers;
    rows[i].reconstruction = compare_images(reconstruct(predicted), c.image);
    if (!records[i].gt_layers.empty()) {
      Phantom reference;
      reference.gt_stack = load_layers(records[i].gt_layers, c.lower, c.upper);
      reference.composed = c.image;
      rows[i].layers = evaluate_separation(predicted, reference);
    }
  });

  MetricReport recon;
  std::vector<MetricReport> per_layer(kNumLayers);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string group = to_string(records[i].kind);
    recon.add({records[i].id, group, rows[i].reconstruction});
    if (rows[i].layers) {
      for (int l = 0; l < kNumLayers; ++l) per_layer[l].add({records[i].id, group, rows[i].layers->layers[l]});
    }
  }
  ordered_json report{{"reconstruction", recon.to_json()}};
  std::string table = "reconstruction vs image\n" + recon.to_table();
  static constexpr const char* kLayerNames[kNumLayers] = {"soft_tissue", "lower_bone", "upper_bone"};
  if (!per_layer[0].entries().empty()) {
    for (int l = 0; l < kNumLayers; ++l) {
      report["layers"][kLayerNames[l]] = per_layer[l].to_json();
      table += std::string("\n") + kLayerNames[l] + " vs ground truth\n" + per_layer[l].to_table();
    }
  }
  write_text(dir / "report.json", report.dump(2) + "\n");
  write_text(dir / "report.txt", table);
  out << table;
  return 0;
}

int cmd_serve(const GlobalOptions& g, const std::string& manifest, const std::string& host, std::optional<int> port,
              const std::string& annotations, std::ostream& out) {
  AppConfig cfg = resolve_config(g);
  if (!host.empty()) cfg.serve.host = host;
  if (port) cfg.serve.port = *port;
  if (!annotations.empty()) cfg.serve.annotations = annotations;
  cfg.validate();
  AnnotationService service(load_cases(manifest), cfg.serve.annotations);
  out << "serving on http://" << cfg.serve.host << ":" << cfg.serve.port << "\n" << std::flush;
  if (!service.listen(cfg.serve.host, cfg.serve.port)) {
    throw RuntimeFailure("cannot bind " + cfg.serve.host + ":" + std::to_string(cfg.serve.port));
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bone/soft-tissue layer separation and adjustable-JSW synthesis"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON configuration file");
  app.add_option("--seed", g.seed, "Random seed (overrides config)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string manifest, extra_manifest, host, annotations;
  int count = 20;
  int pseudo_count = -1;
  std::optional<int> steps, per_source, port;
  std::function<int()> action;

  auto* phantom = app.add_subcommand("phantom", "Generate a phantom suite with ground-truth layers");
  phantom->add_option("--count", count, "Number of phantoms")->check(CLI::NonNegativeNumber);
  phantom->callback([&] { action = [&] { return cmd_phantom(g, count, out); }; });

  auto* pseudo = app.add_subcommand("pseudo", "Build overlap pseudo-images from non-overlap cases");
  pseudo->add_option("--manifest", manifest, "Source manifest")->required();
  pseudo->add_option("--count", pseudo_count, "Number of pseudo-images (default: one per source)");
  pseudo->callback([&] { action = [&] { return cmd_pseudo(g, manifest, pseudo_count, out); }; });

  auto* separate = app.add_subcommand("separate", "Separate each case into soft tissue and bone layers");
  separate->add_option("--manifest", manifest, "Case manifest")->required();
  separate->add_option("--steps", steps, "Optimisation steps (overrides config)");
  separate->callback([&] { action = [&] { return cmd_separate(g, manifest, steps, out); }; });

  auto* train = app.add_subcommand("train", "Two-stage training run");
  train->add_option("--pseudo", manifest, "Pseudo-image manifest (stage 1, with its sources)")->required();
  train->add_option("--manifest", extra_manifest, "Additional real cases for stage 2");
  train->callback([&] { action = [&] { return cmd_train(g, manifest, extra_manifest, out); }; });

  auto* synth = app.add_subcommand("synthesize", "Balanced adjustable-JSW dataset from separated cases");
  synth->add_option("--manifest", manifest, "Manifest of separated cases with JSW")->required();
  synth->add_option("--per-source", per_source, "Outputs per source (overrides config)");
  synth->callback([&] { action = [&] { return cmd_synthesize(g, manifest, per_source, out); }; });

  auto* evaluate = app.add_subcommand("evaluate", "Metric report for separated or phantom cases");
  evaluate->add_option("--manifest", manifest, "Case manifest")->required();
  evaluate->add_option("--steps", steps, "Separation steps for cases without layers");
  evaluate->callback([&] { action = [&] { return cmd_evaluate(g, manifest, steps, out); }; });

  auto* serve = app.add_subcommand("serve", "HTTP API for the annotation tool");
  serve->add_option("--manifest", manifest, "Case manifest")->required();
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--annotations", annotations, "Annotation store (JSON lines)");
  serve->callback([&] { action = [&] { return cmd_serve(g, manifest, host, port, annotations, out); }; });

  for (auto* sub : {phantom, pseudo, separate, train, synth, evaluate, serve}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    return action();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const RuntimeFailure& e) {
    err << "failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace layersep
