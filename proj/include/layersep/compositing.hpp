#pragma once

// Attenuation compositing: overlapping tissues multiply their transmissions,
// so R = 1 - prod_i (1 - L_i) with L_i the absorption-display layers.

#include "layersep/image.hpp"

#include <span>

namespace layersep {

template <typename Scalar>
ImageT<Scalar> reconstruct(std::span<const ImageT<Scalar>> layers) {
  if (layers.empty()) throw ValidationError("reconstruct: no layers");
  ImageT<Scalar> transmission = ImageT<Scalar>::Ones(layers[0].rows(), layers[0].cols());
  for (const auto& layer : layers) {
    require_same_shape(transmission, layer, "reconstruct");
    transmission *= (Scalar(1) - layer);
  }
  return Scalar(1) - transmission;
}

template <typename Scalar>
ImageT<Scalar> reconstruct(const LayerStackT<Scalar>& stack) {
  return reconstruct<Scalar>(std::span<const ImageT<Scalar>>(stack.layers));
}

/// dR/dL_i = prod_{j != i} (1 - L_j), evaluated per pixel.
template <typename Scalar>
ImageT<Scalar> reconstruct_gradient(std::span<const ImageT<Scalar>> layers, int index) {
  if (index < 0 || index >= static_cast<int>(layers.size())) {
    throw ValidationError("reconstruct_gradient: layer index " + std::to_string(index) +
                          " out of range");
  }
  ImageT<Scalar> grad = ImageT<Scalar>::Ones(layers[0].rows(), layers[0].cols());
  for (int j = 0; j < static_cast<int>(layers.size()); ++j) {
    if (j == index) continue;
    require_same_shape(grad, layers[j], "reconstruct_gradient");
    grad *= (Scalar(1) - layers[j]);
  }
  return grad;
}

template <typename Scalar>
ImageT<Scalar> reconstruct_gradient(const LayerStackT<Scalar>& stack, int index) {
  return reconstruct_gradient<Scalar>(std::span<const ImageT<Scalar>>(stack.layers), index);
}

/// Soft tissue plus a single bone, the composite a non-overlap bone region shows.
template <typename Scalar>
ImageT<Scalar> reconstruct_pair(const ImageT<Scalar>& soft, const ImageT<Scalar>& bone) {
  require_same_shape(soft, bone, "reconstruct_pair");
  return Scalar(1) - (Scalar(1) - soft) * (Scalar(1) - bone);
}

/// Values at exactly 1 are pulled to 1 - 1e-6 before entering log space.
inline constexpr double kFullAbsorptionClamp = 1.0 - 1e-6;

template <typename Scalar>
ImageT<Scalar> log_transmission(const ImageT<Scalar>& image) {
  return (Scalar(1) - image.min(Scalar(kFullAbsorptionClamp))).log();
}

}  // namespace layersep
