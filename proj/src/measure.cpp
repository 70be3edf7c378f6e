#include "layersep/measure.hpp"

#include "layersep/geometry.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace layersep {
namespace {

double bilinear_sample(const Image& img, double u, double v) {
  const double fu = std::floor(u), fv = std::floor(v);
  const double au = u - fu, av = v - fv;
  const auto u0 = static_cast<Eigen::Index>(fu), v0 = static_cast<Eigen::Index>(fv);
  auto at = [&](Eigen::Index r, Eigen::Index c) {
    return (r < 0 || r >= img.rows() || c < 0 || c >= img.cols()) ? 0.0 : img(r, c);
  };
  double acc = 0.0;
  if ((1 - au) * (1 - av) != 0.0) acc += (1 - au) * (1 - av) * at(v0, u0);
  if (au * (1 - av) != 0.0) acc += au * (1 - av) * at(v0, u0 + 1);
  if ((1 - au) * av != 0.0) acc += (1 - au) * av * at(v0 + 1, u0);
  if (au * av != 0.0) acc += au * av * at(v0 + 1, u0 + 1);
  return acc;
}

}  // namespace

double joint_gap_px(const Image& lower, const Image& upper, const Eigen::Vector2d& axis_in) {
  require_same_shape(lower, upper, "joint_gap_px");
  if (axis_in.norm() == 0.0) throw ValidationError("joint_gap_px: zero axis");
  const Eigen::Vector2d axis = axis_in.normalized();
  const Eigen::Vector2d normal(-axis.y(), axis.x());
  const Eigen::Vector2d c = image_center(lower.rows(), lower.cols());
  const Eigen::Vector2d origin(std::floor(c.x()), std::floor(c.y()));
  const int reach = static_cast<int>(lower.rows() + lower.cols());

  std::vector<double> lv(2 * reach + 1), uv(2 * reach + 1);
  double best = std::numeric_limits<double>::infinity();
  for (int o = -reach; o <= reach; ++o) {
    const Eigen::Vector2d base = origin + o * normal;
    for (int k = 0; k <= 2 * reach; ++k) {
      const Eigen::Vector2d p = base + static_cast<double>(k - reach) * axis;
      lv[k] = bilinear_sample(lower, p.x(), p.y());
      uv[k] = bilinear_sample(upper, p.x(), p.y());
    }
    int ku = -1, kl = -1;
    for (int k = 0; k <= 2 * reach; ++k) {
      if (uv[k] >= 0.5) { ku = k; break; }
    }
    for (int k = 2 * reach; k >= 0; --k) {
      if (lv[k] >= 0.5) { kl = k; break; }
    }
    if (ku < 0 || kl < 0) continue;
    double edge_upper = ku - reach;
    if (ku > 0) edge_upper = (ku - 1 - reach) + (0.5 - uv[ku - 1]) / (uv[ku] - uv[ku - 1]);
    double edge_lower = kl - reach;
    if (kl < 2 * reach) edge_lower = (kl - reach) + (lv[kl] - 0.5) / (lv[kl] - lv[kl + 1]);
    best = std::min(best, edge_upper - edge_lower);
  }
  if (!std::isfinite(best)) throw ValidationError("joint_gap_px: no line crosses both bones");
  return best;
}

double joint_gap_px(const Mask& lower, const Mask& upper, const Eigen::Vector2d& axis) {
  return joint_gap_px(to_image(lower), to_image(upper), axis);
}

Eigen::Vector2d centroid(const Image& w) {
  double sw = 0.0, su = 0.0, sv = 0.0;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      sw += w(r, c);
      su += w(r, c) * static_cast<double>(c);
      sv += w(r, c) * static_cast<double>(r);
    }
  }
  if (sw <= 0.0) throw ValidationError("centroid: zero total weight");
  return {su / sw, sv / sw};
}

Eigen::Vector2d centroid(const Mask& mask) { return centroid(to_image(mask)); }

double overlap_fraction(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "overlap_fraction");
  const auto smaller = std::min(a.count(), b.count());
  if (smaller == 0) return 0.0;
  return static_cast<double>((a && b).count()) / static_cast<double>(smaller);
}

}  // namespace layersep
