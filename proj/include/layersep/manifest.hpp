#pragma once

// JSON-lines manifests: one case per line, file paths relative to the
// manifest's directory.

#include "layersep/geometry.hpp"
#include "layersep/joint_case.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace layersep {

namespace fs = std::filesystem;

struct CaseRecord {
  std::string id;
  fs::path image;
  fs::path lower_mask;
  fs::path upper_mask;
  double pixel_spacing_mm = kDefaultPixelSpacingMm;
  std::optional<double> jsw_mm;
  std::string split = "train";
  CaseKind kind = CaseKind::Real;
  Eigen::Vector2d axis = default_joint_axis();
  std::string source_id;
  std::vector<fs::path> layers;     ///< separated layers {soft, lower, upper}
  std::vector<fs::path> gt_layers;  ///< ground-truth layers (phantoms)
  std::vector<fs::path> bone_gt;    ///< pseudo-image bone GT {lower, upper}

  friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

nlohmann::ordered_json to_json(const CaseRecord& r);
/// Throws ValidationError naming the offending field.
CaseRecord case_record_from_json(const nlohmann::json& j);

struct ManifestOptions {
  /// Decode every referenced file and compare mask and image shapes.
  bool verify_files = true;
};

/// Paths in the returned records are resolved against the manifest's
/// directory. Diagnostics carry "path:line".
std::vector<CaseRecord> load_manifest(const fs::path& path, const ManifestOptions& options = {});
/// Paths inside the manifest's directory are written relative to it.
void save_manifest(const fs::path& path, const std::vector<CaseRecord>& records);

/// Reads the images a record points at.
JointCase load_case(const CaseRecord& record);
LayerStack load_layers(const std::vector<fs::path>& paths, const Mask& lower, const Mask& upper);

/// Writes image and masks (plus layers and bone GT when the case has them)
/// under dir/<id>_*.png and returns the matching record.
CaseRecord save_case(const fs::path& dir, const JointCase& c);
std::vector<fs::path> save_layers(const fs::path& dir, const std::string& stem, const LayerStack& stack);

struct AnnotationRecord {
  std::string case_id;
  ShiftParams shifts;
  double jsw_mm = 0.0;
  std::string annotator;
  std::string timestamp;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// JSW recorded by alignment: the shifts bring the joint surfaces into
/// contact, so the width is minus their displacement difference.
double aligned_jsw_mm(const ShiftParams& shifts, double pixel_spacing_mm, const Eigen::Vector2d& axis);

/// Shift lists are [{layer, theta_deg, dx_px, dy_px}] with layer in 1..2.
nlohmann::ordered_json shifts_to_json(const ShiftParams& shifts);
ShiftParams shifts_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const AnnotationRecord& a);
AnnotationRecord annotation_from_json(const nlohmann::json& j);

void append_annotation(const fs::path& path, const AnnotationRecord& a);
std::vector<AnnotationRecord> load_annotations(const fs::path& path);

}  // namespace layersep
