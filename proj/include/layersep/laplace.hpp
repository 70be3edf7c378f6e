#pragma once

#include "layersep/image.hpp"

namespace layersep {

struct LaplaceOptions {
  double omega = 1.9;
  double tolerance = 1e-6;  ///< stop once max |residual| < tolerance
  int max_iterations = 10000;
};

struct LaplaceResult {
  Image solution;
  double max_residual = 0.0;
  int iterations = 0;
};

/// Discrete 5-point Laplace residual at p: sum over in-frame neighbours of
/// (u(q) - u(p)). Out-of-frame neighbours are dropped (zero-flux edge).
double laplace_residual(const Image& u, Eigen::Index r, Eigen::Index c);

/// Max |residual| over the region.
double max_laplace_residual(const Image& u, const Mask& region);

/// Solves the Laplace equation on `region` by red-black SOR. Pixels outside
/// the region keep their value from `boundary` (Dirichlet data). Throws
/// RuntimeFailure with the final residual when max_iterations is reached.
LaplaceResult solve_laplace(const Image& boundary, const Mask& region,
                            const LaplaceOptions& options = {});

/// Harmonic fill of `region` from the surrounding image values.
Image harmonic_inpaint(const Image& image, const Mask& region, const LaplaceOptions& options = {});

}  // namespace layersep
