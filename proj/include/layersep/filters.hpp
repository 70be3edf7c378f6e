#pragma once

#include "layersep/image.hpp"

namespace layersep {

/// Separable Gaussian blur with clamp-to-edge borders; radius = ceil(3 sigma).
Image gaussian_blur(const Image& image, double sigma);

/// Mean over a (2r+1)^2 window with zero padding and a fixed 1/(2r+1)^2
/// normalisation. The operator is symmetric, so it is its own adjoint.
Image box_filter(const Image& image, int radius);

/// Normalised 1-D Gaussian taps of length 2*radius+1.
Eigen::ArrayXd gaussian_kernel(double sigma, int radius);

/// Logistic squash and its inverse (argument clamped to (1e-9, 1 - 1e-9)).
Image logistic(const Image& x);
Image logit(const Image& p);

}  // namespace layersep
