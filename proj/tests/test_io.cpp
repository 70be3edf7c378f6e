#include "support.hpp"

#include "layersep/cli.hpp"
#include "layersep/config.hpp"
#include "layersep/manifest.hpp"
#include "layersep/metrics.hpp"
#include "layersep/phantom.hpp"
#include "layersep/png_io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace layersep;
using namespace testing_support;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "layersep");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

/// Relative path -> file bytes for every regular file under dir.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("manifest round trip") {
  TempDir dir("manifest");
  const auto phantoms = make_phantom_suite(PhantomConfig{}, 3, 71);
  std::vector<CaseRecord> records;
  for (const auto& ph : phantoms) records.push_back(save_case(dir.path(), ph.to_joint_case()));
  records[1].split = "test";
  records[2].jsw_mm.reset();
  save_manifest(dir.path() / "manifest.jsonl", records);

  const auto loaded = load_manifest(dir.path() / "manifest.jsonl");
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(loaded[i] == records[i]);
  // paths are written relative to the manifest
  CHECK(read_file(dir.path() / "manifest.jsonl").find(dir.path().string()) == std::string::npos);

  const JointCase c = load_case(loaded[0]);
  CHECK(max_abs_diff(c.image, phantoms[0].composed) <= 1e-5);
  CHECK(masks_equal(c.lower, phantoms[0].lower()));
  // phantom ground truth is kept apart from predicted layers
  CHECK_FALSE(c.layers.has_value());
  REQUIRE(loaded[0].gt_layers.size() == 3);
  const LayerStack gt = load_layers(loaded[0].gt_layers, c.lower, c.upper);
  CHECK(max_abs_diff(gt.layers[2], phantoms[0].gt_stack.layers[2]) <= 1e-5);
  CHECK(c.kind == CaseKind::Phantom);
}

TEST_CASE("manifest diagnostics") {
  TempDir dir("manifest_bad");
  SUBCASE("empty file") {
    write_file(dir.path() / "m.jsonl", "");
    CHECK(load_manifest(dir.path() / "m.jsonl").empty());
  }
  SUBCASE("missing mask file names the path") {
    const CaseRecord r = save_case(dir.path(), make_phantom(PhantomConfig{}, 72).to_joint_case());
    save_manifest(dir.path() / "m.jsonl", {r});
    fs::remove(r.upper_mask);
    try {
      load_manifest(dir.path() / "m.jsonl");
      FAIL("expected a ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find(r.upper_mask.filename().string()) != std::string::npos);
      CHECK(std::string(e.what()).find("m.jsonl:1") != std::string::npos);
    }
    ManifestOptions lax;
    lax.verify_files = false;
    CHECK(load_manifest(dir.path() / "m.jsonl", lax).size() == 1);
  }
  SUBCASE("bad lines") {
    write_file(dir.path() / "m.jsonl", "{\"id\": \"a\"}\n");
    CHECK_THROWS_AS(load_manifest(dir.path() / "m.jsonl"), ValidationError);
    write_file(dir.path() / "m.jsonl", "not json\n");
    CHECK_THROWS_AS(load_manifest(dir.path() / "m.jsonl"), ValidationError);
    CHECK_THROWS(load_manifest(dir.path() / "absent.jsonl"));
  }
  SUBCASE("mask shape mismatch") {
    const CaseRecord r = save_case(dir.path(), make_phantom(PhantomConfig{}, 73).to_joint_case());
    write_mask_png(r.lower_mask, full_mask(10, 10));
    save_manifest(dir.path() / "m.jsonl", {r});
    CHECK_THROWS_AS(load_manifest(dir.path() / "m.jsonl"), ValidationError);
  }
  SUBCASE("record fields") {
    nlohmann::json j = to_json(CaseRecord{"x", "x.png", "l.png", "u.png"});
    j["colour"] = "blue";
    CHECK_THROWS_AS(case_record_from_json(j), ValidationError);
    j.erase("colour");
    j["kind"] = "cadaver";
    CHECK_THROWS_AS(case_record_from_json(j), ValidationError);
  }
}

TEST_CASE("annotations") {
  ShiftParams s;
  s.for_layer(kLowerBone) = {0.0, 0.0, -1.5};
  s.for_layer(kUpperBone) = {radians(2.0), 0.5, 3.0};
  // the upper bone moves 3 px down and the lower 1.5 px up: 4.5 px of closure
  CHECK(aligned_jsw_mm(s, 0.2, default_joint_axis()) == doctest::Approx(0.9).epsilon(1e-12));

  const nlohmann::json sj = shifts_to_json(s);
  CHECK(sj.size() == 2);
  CHECK(sj[1]["theta_deg"] == doctest::Approx(2.0));
  const ShiftParams back = shifts_from_json(sj);
  CHECK(back.for_layer(kUpperBone).theta == doctest::Approx(s.for_layer(kUpperBone).theta).epsilon(1e-15));
  CHECK(back.for_layer(kLowerBone).dy == -1.5);
  CHECK(shifts_from_json(nlohmann::json::array()).is_identity());
  CHECK_THROWS_AS(shifts_from_json(nlohmann::json::parse(R"([{"layer": 0, "dx_px": 1}])")), ValidationError);
  CHECK_THROWS_AS(shifts_from_json(nlohmann::json::parse(R"([{"layer": 1, "dx_px": "x"}])")), ValidationError);

  TempDir dir("annotations");
  const AnnotationRecord a{"case_1", s, 0.9, "reader", "2026-01-01T00:00:00Z"};
  append_annotation(dir.path() / "a.jsonl", a);
  append_annotation(dir.path() / "a.jsonl", a);
  const auto loaded = load_annotations(dir.path() / "a.jsonl");
  REQUIRE(loaded.size() == 2);
  CHECK(annotation_from_json(to_json(a)).case_id == "case_1");
  CHECK(loaded[0].jsw_mm == a.jsw_mm);
  CHECK(loaded[0].annotator == a.annotator);
}

TEST_CASE("config") {
  SUBCASE("defaults round trip") {
    const AppConfig c;
    const AppConfig back = config_from_json(nlohmann::json::parse(to_json(c).dump()));
    CHECK(to_json(back) == to_json(c));
    CHECK(config_hash(back) == config_hash(c));
    CHECK(c.train.lr_g == 1e-4);
    CHECK(c.train.stage1_epochs == 300);
    CHECK(c.weights.alpha + c.weights.beta + c.weights.gamma == doctest::Approx(1.0));
  }
  SUBCASE("partial documents override only what they name") {
    const auto j = nlohmann::json::parse(R"({"seed": 9, "train": {"stage1_epochs": 40, "stage1_switch_m": 20},
                                            "separation": {"optimizer": "momentum"}})");
    AppConfig c = config_from_json(j);
    CHECK(c.seed == 9);
    CHECK(c.train.stage1_epochs == 40);
    CHECK(c.train.lr_d == 5e-4);
    CHECK(c.separation.optimizer == OptimizerKind::Momentum);
    CHECK(config_hash(c) != config_hash(AppConfig{}));
    c.propagate();
    CHECK(c.train.seed == 9);
  }
  SUBCASE("unknown keys name their path") {
    try {
      config_from_json(nlohmann::json::parse(R"({"train": {"epochs": 3}})"));
      FAIL("expected a ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("train.epochs") != std::string::npos);
    }
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"seed": "x"})")), ValidationError);
  }
  SUBCASE("invalid values") {
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"train": {"stage1_switch_m": 400}})")),
                    ValidationError);
  }
  SUBCASE("file loading") {
    TempDir dir("config");
    write_file(dir.path() / "c.json", R"({"jobs": 3})");
    CHECK(load_config(dir.path() / "c.json").jobs == 3);
    write_file(dir.path() / "bad.json", "{");
    CHECK_THROWS_AS(load_config(dir.path() / "bad.json"), ValidationError);
  }
}

TEST_CASE("cli exit codes") {
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({}).code == 1);
  const CliRun help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("phantom") != std::string::npos);
  TempDir dir("cli_codes");
  CHECK(cli({"evaluate", "--manifest", (dir.path() / "absent.jsonl").string(), "--out", dir.path().string()}).code != 0);
  write_file(dir.path() / "bad.json", R"({"train": {"stage1_switch_m": 400}})");
  const CliRun bad = cli({"--config", (dir.path() / "bad.json").string(), "phantom", "--count", "1", "--out",
                          dir.path().string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("stage1_switch_m") != std::string::npos);
}

TEST_CASE("cli phantom and evaluate") {
  TempDir dir("cli_eval");
  const fs::path phantoms = dir.path() / "phantoms", report = dir.path() / "report";
  REQUIRE(cli({"--seed", "7", "phantom", "--count", "2", "--out", phantoms.string()}).code == 0);
  REQUIRE(fs::exists(phantoms / "manifest.jsonl"));
  // Present the ground truth as the prediction.
  auto records = load_manifest(phantoms / "manifest.jsonl");
  for (auto& r : records) r.layers = r.gt_layers;
  save_manifest(phantoms / "as_predicted.jsonl", records);
  const CliRun run = cli({"evaluate", "--manifest", (phantoms / "as_predicted.jsonl").string(), "--out", report.string()});
  REQUIRE(run.code == 0);
  const auto j = nlohmann::json::parse(read_file(report / "report.json"));
  // Reconstruction differs from the stored image by PNG quantisation only.
  REQUIRE(j["reconstruction"]["cases"].size() == 2);
  for (const auto& c : j["reconstruction"]["cases"]) {
    CHECK(c["mse"].get<double>() <= 1e-9);
    CHECK(c["ssim"].get<double>() >= 0.9999);
  }
  REQUIRE(j["layers"].contains("soft_tissue"));
  for (const char* layer : {"soft_tissue", "lower_bone", "upper_bone"}) {
    CHECK(j["layers"][layer]["cases"][0]["mse"].get<double>() == 0.0);
    CHECK(j["layers"][layer]["cases"][1]["psnr_db"].get<double>() == kPsnrCapDb);
  }
  CHECK(read_file(report / "report.txt").find("phantom") != std::string::npos);
}

TEST_CASE("cli output is deterministic in the seed") {
  TempDir dir("cli_seed");
  const fs::path a = dir.path() / "a", b = dir.path() / "b", c = dir.path() / "c";
  for (const fs::path& out : {a, b}) {
    REQUIRE(cli({"--seed", "7", "phantom", "--count", "3", "--out", (out / "ph").string()}).code == 0);
    REQUIRE(cli({"--seed", "7", "separate", "--manifest", (out / "ph" / "manifest.jsonl").string(), "--steps", "5",
                 "--out", (out / "sep").string()})
                .code == 0);
  }
  CHECK(tree(a) == tree(b));
  REQUIRE(cli({"--seed", "8", "phantom", "--count", "3", "--out", (c / "ph").string()}).code == 0);
  CHECK(tree(a / "ph") != tree(c / "ph"));
}

TEST_CASE("cli pipeline: pseudo, train, synthesize") {
  TempDir dir("cli_pipeline");
  const fs::path root = dir.path();
  write_file(root / "cfg.json", R"({
    "phantom": {"gap_min": 4, "gap_max": 8},
    "train": {"stage1_epochs": 2, "stage1_switch_m": 1, "stage2_epochs": 1, "batch_size": 2, "image_size": 64},
    "synthesis": {"per_source": 5}
  })");
  const std::string cfg = (root / "cfg.json").string();
  REQUIRE(cli({"--config", cfg, "--seed", "3", "phantom", "--count", "3", "--out", (root / "ph").string()}).code == 0);
  REQUIRE(cli({"--config", cfg, "pseudo", "--manifest", (root / "ph" / "manifest.jsonl").string(), "--count", "3",
               "--out", (root / "pseudo").string()})
              .code == 0);
  const auto diag = nlohmann::json::parse(read_file(root / "pseudo" / "pseudo_diagnostics.json"));
  CHECK(diag.size() == 3);
  for (const auto& d : diag) CHECK(d["continuity_outer"].get<double>() == 0.0);

  REQUIRE(cli({"--config", cfg, "train", "--pseudo", (root / "pseudo" / "manifest.jsonl").string(), "--out",
               (root / "train").string()})
              .code == 0);
  std::istringstream log(read_file(root / "train" / "train_log.jsonl"));
  std::string line;
  int epochs = 0;
  while (std::getline(log, line)) ++epochs;
  CHECK(epochs == 3);
  CHECK(fs::exists(root / "train" / "critics.json"));

  REQUIRE(cli({"--config", cfg, "separate", "--manifest", (root / "ph" / "manifest.jsonl").string(), "--steps", "3",
               "--out", (root / "sep").string()})
              .code == 0);
  // phantoms without separated layers are refused
  CHECK(cli({"--config", cfg, "synthesize", "--manifest", (root / "ph" / "manifest.jsonl").string(), "--out",
             (root / "nosyn").string()})
            .code == 1);
  REQUIRE(cli({"--config", cfg, "synthesize", "--manifest", (root / "sep" / "manifest.jsonl").string(), "--out",
               (root / "syn").string()})
              .code == 0);
  std::istringstream ann(read_file(root / "syn" / "annotations.jsonl"));
  int count = 0;
  while (std::getline(ann, line)) {
    const auto a = nlohmann::json::parse(line);
    for (const char* key : {"id", "source_id", "jsw_mm", "svdh_like", "shift", "pixel_spacing_mm"}) CHECK(a.contains(key));
    ++count;
  }
  CHECK(count == 15);
  CHECK(load_manifest(root / "syn" / "manifest.jsonl").size() == 15);
}

#ifdef LAYERSEP_CLI
TEST_CASE("installed binary exit codes") {
  const std::string bin = LAYERSEP_CLI;
  CHECK(std::system((bin + " frobnicate > /dev/null 2>&1").c_str()) != 0);
  const int status = std::system((bin + " frobnicate > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(status) == 1);
  CHECK(std::system((bin + " --help > /dev/null 2>&1").c_str()) == 0);
}
#endif
