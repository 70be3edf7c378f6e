#include "layersep/manifest.hpp"

#include "layersep/png_io.hpp"
#include "layersep/synthesis.hpp"

#include <fstream>
#include <set>

namespace layersep {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T>
T field(const json& j, const std::string& name) {
  if (!j.contains(name)) throw ValidationError("missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("field '" + name + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const std::string& name) {
  if (!j.contains(name) || j.at(name).is_null()) return std::nullopt;
  return field<T>(j, name);
}

void reject_unknown(const json& j, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ValidationError("expected a JSON object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ValidationError("unknown field '" + key + "'");
  }
}

std::vector<fs::path> path_list(const json& j, const std::string& name, std::size_t expected) {
  if (!j.contains(name)) return {};
  const auto names = field<std::vector<std::string>>(j, name);
  if (names.size() != expected) {
    throw ValidationError("field '" + name + "' needs " + std::to_string(expected) + " entries");
  }
  return {names.begin(), names.end()};
}

fs::path relative_to(const fs::path& p, const fs::path& dir) {
  if (p.empty() || dir.empty()) return p;
  const fs::path rel = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(dir).lexically_normal());
  return rel.empty() ? fs::absolute(p) : rel;
}

fs::path resolve(const fs::path& p, const fs::path& dir) {
  if (p.empty() || p.is_absolute()) return p;
  return (dir / p).lexically_normal();
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw ValidationError("missing file " + p.string());
}

void verify(const CaseRecord& r) {
  require_file(r.image);
  require_file(r.lower_mask);
  require_file(r.upper_mask);
  const Image img = read_png(r.image);
  for (const auto& m : {r.lower_mask, r.upper_mask}) {
    const Mask mask = read_mask_png(m);
    if (!same_shape(img, mask)) throw ValidationError("mask " + m.string() + " does not match image dimensions");
  }
  for (const auto* list : {&r.layers, &r.gt_layers, &r.bone_gt}) {
    for (const auto& p : *list) {
      require_file(p);
      if (!same_shape(img, read_png(p))) throw ValidationError("layer " + p.string() + " does not match image dimensions");
    }
  }
}

CaseRecord with_paths(CaseRecord r, const std::function<fs::path(const fs::path&)>& f) {
  r.image = f(r.image);
  r.lower_mask = f(r.lower_mask);
  r.upper_mask = f(r.upper_mask);
  for (auto* list : {&r.layers, &r.gt_layers, &r.bone_gt}) {
    for (auto& p : *list) p = f(p);
  }
  return r;
}

std::vector<std::string> path_strings(const std::vector<fs::path>& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.generic_string());
  return out;
}

}  // namespace

const char* to_string(CaseKind kind) {
  switch (kind) {
    case CaseKind::Real: return "real";
    case CaseKind::Pseudo: return "pseudo";
    case CaseKind::Phantom: return "phantom";
    case CaseKind::Synthetic: return "synthetic";
  }
  return "real";
}

CaseKind case_kind_from_string(const std::string& name) {
  if (name == "real") return CaseKind::Real;
  if (name == "pseudo") return CaseKind::Pseudo;
  if (name == "phantom") return CaseKind::Phantom;
  if (name == "synthetic") return CaseKind::Synthetic;
  throw ValidationError("unknown case kind '" + name + "'");
}

ordered_json to_json(const CaseRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["image"] = r.image.generic_string();
  j["lower_mask"] = r.lower_mask.generic_string();
  j["upper_mask"] = r.upper_mask.generic_string();
  j["pixel_spacing_mm"] = r.pixel_spacing_mm;
  if (r.jsw_mm) j["jsw_mm"] = *r.jsw_mm;
  j["split"] = r.split;
  j["kind"] = to_string(r.kind);
  j["axis"] = {r.axis.x(), r.axis.y()};
  if (!r.source_id.empty()) j["source_id"] = r.source_id;
  if (!r.layers.empty()) j["layers"] = path_strings(r.layers);
  if (!r.gt_layers.empty()) j["gt_layers"] = path_strings(r.gt_layers);
  if (!r.bone_gt.empty()) j["bone_gt"] = path_strings(r.bone_gt);
  return j;
}

CaseRecord case_record_from_json(const json& j) {
  reject_unknown(j, {"id", "image", "lower_mask", "upper_mask", "pixel_spacing_mm", "jsw_mm", "split", "kind",
                     "axis", "source_id", "layers", "gt_layers", "bone_gt"});
  CaseRecord r;
  r.id = field<std::string>(j, "id");
  if (r.id.empty()) throw ValidationError("field 'id' is empty");
  r.image = field<std::string>(j, "image");
  r.lower_mask = field<std::string>(j, "lower_mask");
  r.upper_mask = field<std::string>(j, "upper_mask");
  r.pixel_spacing_mm = optional_field<double>(j, "pixel_spacing_mm").value_or(kDefaultPixelSpacingMm);
  if (!(r.pixel_spacing_mm > 0.0)) throw ValidationError("field 'pixel_spacing_mm' must be positive");
  r.jsw_mm = optional_field<double>(j, "jsw_mm");
  if (r.jsw_mm && !(*r.jsw_mm >= 0.0)) throw ValidationError("field 'jsw_mm' must be non-negative");
  r.split = optional_field<std::string>(j, "split").value_or("train");
  if (r.split != "train" && r.split != "test") throw ValidationError("field 'split' must be train or test");
  r.kind = case_kind_from_string(optional_field<std::string>(j, "kind").value_or("real"));
  if (const auto axis = optional_field<std::vector<double>>(j, "axis")) {
    if (axis->size() != 2) throw ValidationError("field 'axis' needs two entries");
    r.axis = {(*axis)[0], (*axis)[1]};
    if (std::abs(r.axis.norm() - 1.0) > 1e-6) throw ValidationError("field 'axis' must be a unit vector");
  }
  r.source_id = optional_field<std::string>(j, "source_id").value_or("");
  r.layers = path_list(j, "layers", kNumLayers);
  r.gt_layers = path_list(j, "gt_layers", kNumLayers);
  r.bone_gt = path_list(j, "bone_gt", kNumBones);
  return r;
}

std::vector<CaseRecord> load_manifest(const fs::path& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  const fs::path dir = path.parent_path();
  std::vector<CaseRecord> out;
  std::set<std::string> ids;
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(number) + ": ";
    try {
      const json j = json::parse(line);
      CaseRecord r = with_paths(case_record_from_json(j), [&](const fs::path& p) { return resolve(p, dir); });
      if (!ids.insert(r.id).second) throw ValidationError("duplicate id '" + r.id + "'");
      if (options.verify_files) verify(r);
      out.push_back(std::move(r));
    } catch (const json::parse_error& e) {
      throw ValidationError(where + "malformed JSON (" + e.what() + ")");
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return out;
}

void save_manifest(const fs::path& path, const std::vector<CaseRecord>& records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write manifest " + path.string());
  const fs::path dir = path.parent_path();
  for (const auto& r : records) {
    out << to_json(with_paths(r, [&](const fs::path& p) { return relative_to(p, dir); })).dump() << '\n';
  }
  if (!out) throw RuntimeFailure("failed writing manifest " + path.string());
}

LayerStack load_layers(const std::vector<fs::path>& paths, const Mask& lower, const Mask& upper) {
  LayerStack stack;
  stack.masks = {full_mask(lower.rows(), lower.cols()), lower, upper};
  for (std::size_t i = 0; i < paths.size(); ++i) {
    stack.layers.push_back(apply_mask(read_png(paths[i]), stack.masks[i]));
  }
  validate_stack(stack);
  return stack;
}

JointCase load_case(const CaseRecord& r) {
  JointCase c;
  c.id = r.id;
  c.image = read_png(r.image);
  c.lower = read_mask_png(r.lower_mask);
  c.upper = read_mask_png(r.upper_mask);
  require_same_shape(c.image, c.lower, "lower mask");
  require_same_shape(c.image, c.upper, "upper mask");
  c.pixel_spacing_mm = r.pixel_spacing_mm;
  c.axis = r.axis;
  c.jsw_mm = r.jsw_mm;
  c.kind = r.kind;
  c.split = r.split;
  c.source_id = r.source_id;
  if (!r.layers.empty()) c.layers = load_layers(r.layers, c.lower, c.upper);
  if (!r.bone_gt.empty()) {
    c.bone_gt = std::vector<Image>{apply_mask(read_png(r.bone_gt[0]), c.lower),
                                   apply_mask(read_png(r.bone_gt[1]), c.upper)};
  }
  return c;
}

std::vector<fs::path> save_layers(const fs::path& dir, const std::string& stem, const LayerStack& stack) {
  std::vector<fs::path> out;
  for (int i = 0; i < stack.size(); ++i) {
    out.push_back(dir / (stem + "_layer" + std::to_string(i) + ".png"));
    write_png(out.back(), stack.layers[i]);
  }
  return out;
}

CaseRecord save_case(const fs::path& dir, const JointCase& c) {
  fs::create_directories(dir);
  CaseRecord r;
  r.id = c.id;
  r.image = dir / (c.id + "_image.png");
  r.lower_mask = dir / (c.id + "_lower.png");
  r.upper_mask = dir / (c.id + "_upper.png");
  write_png(r.image, c.image);
  write_mask_png(r.lower_mask, c.lower);
  write_mask_png(r.upper_mask, c.upper);
  r.pixel_spacing_mm = c.pixel_spacing_mm;
  r.jsw_mm = c.jsw_mm;
  r.split = c.split;
  r.kind = c.kind;
  r.axis = c.axis;
  r.source_id = c.source_id;
  if (c.layers) {
    if (c.kind == CaseKind::Phantom) {
      r.gt_layers = save_layers(dir, c.id + "_gt", *c.layers);
    } else {
      r.layers = save_layers(dir, c.id, *c.layers);
    }
  }
  if (c.bone_gt) {
    for (int b = 0; b < kNumBones; ++b) {
      r.bone_gt.push_back(dir / (c.id + "_bonegt" + std::to_string(b + 1) + ".png"));
      write_png(r.bone_gt.back(), (*c.bone_gt)[b]);
    }
  }
  return r;
}

double aligned_jsw_mm(const ShiftParams& shifts, double pixel_spacing_mm, const Eigen::Vector2d& axis) {
  return -displacement_difference_mm(shifts, pixel_spacing_mm, axis);
}

ordered_json shifts_to_json(const ShiftParams& shifts) {
  ordered_json list = ordered_json::array();
  for (std::size_t k = 0; k < shifts.bones.size(); ++k) {
    const RigidShift& s = shifts.bones[k];
    list.push_back({{"layer", k + 1}, {"theta_deg", degrees(s.theta)}, {"dx_px", s.dx}, {"dy_px", s.dy}});
  }
  return list;
}

ShiftParams shifts_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("field 'shifts' must be an array");
  ShiftParams p = ShiftParams::identity();
  std::set<int> seen;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = "shifts[" + std::to_string(i) + "]: ";
    try {
      const json& e = j[i];
      reject_unknown(e, {"layer", "theta_deg", "dx_px", "dy_px"});
      const int layer = field<int>(e, "layer");
      if (layer < 1 || layer > kNumBones) throw ValidationError("field 'layer' must be 1 or 2");
      if (!seen.insert(layer).second) throw ValidationError("layer " + std::to_string(layer) + " given twice");
      RigidShift s;
      s.theta = radians(optional_field<double>(e, "theta_deg").value_or(0.0));
      s.dx = optional_field<double>(e, "dx_px").value_or(0.0);
      s.dy = optional_field<double>(e, "dy_px").value_or(0.0);
      if (!std::isfinite(s.theta) || !std::isfinite(s.dx) || !std::isfinite(s.dy)) {
        throw ValidationError("shift values must be finite");
      }
      p.for_layer(layer) = s;
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  p.validate();
  return p;
}

ordered_json to_json(const AnnotationRecord& a) {
  ordered_json j;
  j["case_id"] = a.case_id;
  j["shifts"] = shifts_to_json(a.shifts);
  j["jsw_mm"] = a.jsw_mm;
  j["annotator"] = a.annotator;
  j["timestamp"] = a.timestamp;
  return j;
}

AnnotationRecord annotation_from_json(const json& j) {
  reject_unknown(j, {"case_id", "shifts", "jsw_mm", "annotator", "timestamp"});
  AnnotationRecord a;
  a.case_id = field<std::string>(j, "case_id");
  if (!j.contains("shifts")) throw ValidationError("missing field 'shifts'");
  a.shifts = shifts_from_json(j.at("shifts"));
  a.jsw_mm = field<double>(j, "jsw_mm");
  a.annotator = optional_field<std::string>(j, "annotator").value_or("");
  a.timestamp = optional_field<std::string>(j, "timestamp").value_or("");
  return a;
}

void append_annotation(const fs::path& path, const AnnotationRecord& a) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw RuntimeFailure("cannot open annotation store " + path.string());
  out << to_json(a).dump() << '\n';
  out.flush();
  if (!out) throw RuntimeFailure("failed writing annotation store " + path.string());
}

std::vector<AnnotationRecord> load_annotations(const fs::path& path) {
  std::vector<AnnotationRecord> out;
  if (!fs::exists(path)) return out;
  std::ifstream in(path);
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(annotation_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(number) + ": malformed JSON");
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace layersep
