#pragma once

// Rigid shifts of the bone layers. Coordinates are (u, v) = (column, row);
// rotations act about the image centre ((cols - 1) / 2, (rows - 1) / 2).

#include "layersep/image.hpp"
#include "layersep/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace layersep {

/// 2x3 matrix [R | t] acting on offsets from a centre.
using Transform = Eigen::Matrix<double, 2, 3>;

/// Shift of one bone layer: rotation (radians) then translation (pixels).
struct RigidShift {
  double theta = 0.0;
  double dx = 0.0;
  double dy = 0.0;

  bool is_identity() const { return theta == 0.0 && dx == 0.0 && dy == 0.0; }
  friend bool operator==(const RigidShift&, const RigidShift&) = default;
};

/// One entry per bone layer; bones[k] moves layer k + 1. Soft tissue never moves.
struct ShiftParams {
  std::vector<RigidShift> bones = std::vector<RigidShift>(kNumBones);

  static ShiftParams identity(int num_bones = kNumBones) {
    return ShiftParams{std::vector<RigidShift>(num_bones)};
  }
  const RigidShift& for_layer(int layer) const;
  RigidShift& for_layer(int layer);
  bool is_identity() const;
  void validate() const;
  friend bool operator==(const ShiftParams&, const ShiftParams&) = default;
};

struct ShiftRange {
  double theta_max = 3.0 * std::numbers::pi / 180.0;
  double x_min = -8.0, x_max = 8.0;
  double y_min = -8.0, y_max = 8.0;
  std::uint64_t seed = 0;

  void validate() const;
};

inline double degrees(double radians) { return radians * 180.0 / std::numbers::pi; }
inline double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

Transform make_transform(double theta, double x, double y);
inline Transform make_transform(const RigidShift& s) { return make_transform(s.theta, s.dx, s.dy); }

/// Uniform scale about the centre followed by a translation.
Transform make_scale_translation(double scale, double x, double y);

/// outer o inner: applying the result equals applying inner, then outer.
Transform compose(const Transform& outer, const Transform& inner);
Transform invert(const Transform& t);

/// Reads (theta, x, y) back from a rigid transform.
RigidShift to_rigid_shift(const Transform& t);
ShiftParams compose(const ShiftParams& outer, const ShiftParams& inner);

Eigen::Vector2d image_center(Eigen::Index rows, Eigen::Index cols);
Eigen::Vector2d apply_transform(const Transform& t, const Eigen::Vector2d& point,
                                const Eigen::Vector2d& center);

enum class Interpolation { Bilinear, Nearest };

/// What a sample outside the frame reads: zero, or the nearest edge pixel.
enum class EdgeMode { Zero, Clamp };

/// Resampling as a sparse linear operator on the row-major pixel vector:
/// out = W * in. Out-of-frame samples contribute zero.
using WarpOperator = Eigen::SparseMatrix<double, Eigen::RowMajor>;

WarpOperator warp_operator(Eigen::Index rows, Eigen::Index cols, const Transform& t,
                           Interpolation mode, const Eigen::Vector2d& center,
                           EdgeMode edge = EdgeMode::Zero);
WarpOperator warp_operator(Eigen::Index rows, Eigen::Index cols, const Transform& t,
                           Interpolation mode);

Image warp(const Image& image, const WarpOperator& op);
/// W^T applied to an image-shaped vector; the gradient pull-back of warp().
Image warp_adjoint(const Image& image, const WarpOperator& op);

/// Nearest-neighbour warp re-binarised at 0.5.
Mask warp_mask(const Mask& mask, const Transform& t, const Eigen::Vector2d& center,
               EdgeMode edge = EdgeMode::Zero);
Mask warp_mask(const Mask& mask, const Transform& t);

/// True when some mask pixel centre lands outside the frame under t.
bool clips_frame(const Mask& mask, const Transform& t, const Eigen::Vector2d& center);

/// The per-layer linear maps of one stack shift, kept so gradients can be
/// pulled back through it. layer_ops[0] is unused (soft tissue is fixed).
struct StackWarp {
  std::vector<WarpOperator> layer_ops;
  std::vector<Mask> shifted_masks;
  bool clipped = false;

  /// Layer i after the shift: shifted_mask_i * (W_i L_i); layer 0 unchanged.
  Image apply(int layer, const Image& image) const;
  /// Adjoint of apply().
  Image pull_back(int layer, const Image& grad) const;
};

StackWarp build_stack_warp(std::span<const Mask> stack_masks, const ShiftParams& params);

struct ShiftedStack {
  LayerStack stack;
  bool clipped = false;
};

/// Bone layers are bilinearly resampled and re-masked; masks use nearest
/// neighbour. Layer 0 is copied bit-for-bit.
ShiftedStack shift_stack(const LayerStack& stack, const ShiftParams& params);

/// Accepts either the bone masks alone or a full stack mask list whose first
/// entry (soft tissue) is passed through.
std::vector<Mask> shift_masks(std::span<const Mask> masks, const ShiftParams& params);

/// Independent uniform draws per bone; deterministic in range.seed.
ShiftParams sample_shift(const ShiftRange& range);
ShiftParams sample_shift(const ShiftRange& range, Rng& rng);

}  // namespace layersep
