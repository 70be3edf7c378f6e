#include "layersep/laplace.hpp"

#include <cmath>
#include <sstream>

namespace layersep {

double laplace_residual(const Image& u, Eigen::Index r, Eigen::Index c) {
  const double centre = u(r, c);
  double acc = 0.0;
  if (r > 0) acc += u(r - 1, c) - centre;
  if (r + 1 < u.rows()) acc += u(r + 1, c) - centre;
  if (c > 0) acc += u(r, c - 1) - centre;
  if (c + 1 < u.cols()) acc += u(r, c + 1) - centre;
  return acc;
}

double max_laplace_residual(const Image& u, const Mask& region) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
      if (region(r, c)) worst = std::max(worst, std::abs(laplace_residual(u, r, c)));
    }
  }
  return worst;
}

LaplaceResult solve_laplace(const Image& boundary, const Mask& region, const LaplaceOptions& options) {
  require_same_shape(boundary, region, "solve_laplace");
  if (!region.any()) return {boundary, 0.0, 0};
  if (region.all()) throw ValidationError("solve_laplace: region has no boundary");
  if (options.omega <= 0.0 || options.omega >= 2.0) {
    throw ValidationError("solve_laplace: omega must lie in (0, 2)");
  }

  const Eigen::Index rows = boundary.rows(), cols = boundary.cols();
  LaplaceResult result;
  result.solution = boundary;
  Image& u = result.solution;

  // Start the interior at the mean of the Dirichlet ring.
  const Mask ring = outer_ring(region);
  if (!ring.any()) throw ValidationError("solve_laplace: region has an empty boundary ring");
  const double ring_mean = (boundary * ring.cast<double>()).sum() / static_cast<double>(ring.count());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (region.data()[i]) u.data()[i] = ring_mean;
  }

  for (int it = 1; it <= options.max_iterations; ++it) {
    for (int colour = 0; colour < 2; ++colour) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = (r + colour) % 2; c < cols; c += 2) {
          if (!region(r, c)) continue;
          int neighbours = 0;
          double acc = 0.0;
          if (r > 0) { acc += u(r - 1, c); ++neighbours; }
          if (r + 1 < rows) { acc += u(r + 1, c); ++neighbours; }
          if (c > 0) { acc += u(r, c - 1); ++neighbours; }
          if (c + 1 < cols) { acc += u(r, c + 1); ++neighbours; }
          const double gauss_seidel = acc / neighbours;
          u(r, c) += options.omega * (gauss_seidel - u(r, c));
        }
      }
    }
    result.iterations = it;
    result.max_residual = max_laplace_residual(u, region);
    if (result.max_residual < options.tolerance) return result;
  }
  std::ostringstream msg;
  msg << "Laplace solver did not converge after " << options.max_iterations
      << " iterations (max residual " << result.max_residual << ")";
  throw RuntimeFailure(msg.str());
}

Image harmonic_inpaint(const Image& image, const Mask& region, const LaplaceOptions& options) {
  return solve_laplace(image, region, options).solution;
}

}  // namespace layersep
