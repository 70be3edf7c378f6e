#pragma once

#include "layersep/image.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace layersep {

enum class CaseKind { Real, Pseudo, Phantom, Synthetic };

const char* to_string(CaseKind kind);
CaseKind case_kind_from_string(const std::string& name);

/// Default joint axis in (column, row) coordinates: the unit vector pointing
/// from the lower bone towards the upper bone, i.e. up the image.
inline Eigen::Vector2d default_joint_axis() { return {0.0, -1.0}; }

/// Default detector pitch: 1.75 mm of normal joint space spans 10 px.
inline constexpr double kDefaultPixelSpacingMm = 0.175;

/// One joint radiograph with its bone masks and whatever is known about it.
struct JointCase {
  std::string id;
  Image image;
  Mask lower;
  Mask upper;
  double pixel_spacing_mm = kDefaultPixelSpacingMm;
  Eigen::Vector2d axis = default_joint_axis();
  std::optional<double> jsw_mm;
  CaseKind kind = CaseKind::Real;
  std::string split = "train";
  /// For pseudo-images: the non-overlap case the bones were taken from.
  std::string source_id;
  /// Separated (or ground-truth) layers, when available.
  std::optional<LayerStack> layers;
  /// Bone regions with soft-tissue texture; present on pseudo-images only.
  std::optional<std::vector<Image>> bone_gt;

  /// {full frame, lower, upper}: the soft-tissue mask M0 defaults to the frame.
  std::vector<Mask> stack_masks() const {
    return {full_mask(image.rows(), image.cols()), lower, upper};
  }
  Mask bone_union() const { return lower || upper; }
  Mask bone_overlap() const { return lower && upper; }
};

}  // namespace layersep
