#pragma once

#include "layersep/image.hpp"

#include <Eigen/Core>

namespace layersep {

/// Gap in pixels between the facing surfaces of two bone masks, measured
/// along lines parallel to `axis` (unit vector pointing from lower to upper
/// bone); the minimum over lateral offsets is returned. Inputs are soft masks
/// in [0, 1]; surfaces sit where the value crosses 0.5, located to sub-pixel
/// precision by linear interpolation. Negative values mean overlap.
/// Throws ValidationError when no line crosses both bones.
double joint_gap_px(const Image& lower, const Image& upper, const Eigen::Vector2d& axis);
double joint_gap_px(const Mask& lower, const Mask& upper, const Eigen::Vector2d& axis);

/// Intensity-weighted centroid (column, row) of a non-negative image.
Eigen::Vector2d centroid(const Image& weights);
Eigen::Vector2d centroid(const Mask& mask);

/// |a & b| / min(|a|, |b|); 0 when either mask is empty.
double overlap_fraction(const Mask& a, const Mask& b);

}  // namespace layersep
