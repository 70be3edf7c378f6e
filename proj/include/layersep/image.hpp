#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace layersep {

/// Dense single-channel image, row-major, rows = height.
template <typename Scalar>
using ImageT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Image = ImageT<double>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Layer order used everywhere: soft tissue first, then the two bones.
enum LayerIndex : int { kSoftTissue = 0, kLowerBone = 1, kUpperBone = 2 };
inline constexpr int kNumLayers = 3;
inline constexpr int kNumBones = kNumLayers - 1;

/// Raised for malformed inputs (bad dimensions, out-of-range values, bad records).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation cannot complete (solver divergence, NaN loss).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered tissue layers with their support masks. Layer 0 is soft tissue.
template <typename Scalar>
struct LayerStackT {
  std::vector<ImageT<Scalar>> layers;
  std::vector<Mask> masks;

  int size() const { return static_cast<int>(layers.size()); }
  Eigen::Index rows() const { return layers.empty() ? 0 : layers.front().rows(); }
  Eigen::Index cols() const { return layers.empty() ? 0 : layers.front().cols(); }
};

using LayerStack = LayerStackT<double>;

template <typename A, typename B>
bool same_shape(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

template <typename A, typename B>
void require_same_shape(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b,
                        const char* what) {
  if (!same_shape(a, b)) {
    throw ValidationError(std::string(what) + ": dimension mismatch (" +
                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

/// Throws unless the image is non-empty with all values in [0, 1].
void validate_image(const Image& image, const char* what = "image");

/// Throws unless the stack has kNumLayers layers, matching masks, and
/// bone layers vanish outside their masks.
void validate_stack(const LayerStack& stack);

inline Mask full_mask(Eigen::Index rows, Eigen::Index cols) {
  return Mask::Constant(rows, cols, true);
}

inline Mask empty_mask(Eigen::Index rows, Eigen::Index cols) {
  return Mask::Constant(rows, cols, false);
}

inline Image to_image(const Mask& mask) { return mask.cast<double>(); }

inline Eigen::Index count(const Mask& mask) { return mask.count(); }

Mask mask_intersection(std::span<const Mask> masks);
Mask mask_union(std::span<const Mask> masks);

/// Per-pixel product L = image * mask.
Image apply_mask(const Image& image, const Mask& mask);

/// Pixels within `radius` (Chebyshev) of the mask, excluding the mask itself.
Mask dilation_ring(const Mask& mask, int radius);

/// Pixels outside the mask that are 4-adjacent to it.
Mask outer_ring(const Mask& mask);

/// Pixels inside the mask that are 4-adjacent to a pixel outside it (in-frame).
Mask inner_ring(const Mask& mask);

}  // namespace layersep
