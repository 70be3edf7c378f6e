#include "layersep/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace layersep {

const RigidShift& ShiftParams::for_layer(int layer) const {
  if (layer < 1 || layer > static_cast<int>(bones.size())) {
    throw ValidationError("shift params: no entry for layer " + std::to_string(layer));
  }
  return bones[layer - 1];
}

RigidShift& ShiftParams::for_layer(int layer) {
  return const_cast<RigidShift&>(std::as_const(*this).for_layer(layer));
}

bool ShiftParams::is_identity() const {
  for (const auto& b : bones) {
    if (!b.is_identity()) return false;
  }
  return true;
}

void ShiftParams::validate() const {
  for (const auto& b : bones) {
    if (!std::isfinite(b.theta) || !std::isfinite(b.dx) || !std::isfinite(b.dy)) {
      throw ValidationError("shift params: non-finite entry");
    }
    if (std::abs(b.theta) > std::numbers::pi) {
      throw ValidationError("shift params: |theta| exceeds pi");
    }
  }
}

void ShiftRange::validate() const {
  const double vals[] = {theta_max, x_min, x_max, y_min, y_max};
  for (double v : vals) {
    if (!std::isfinite(v)) throw ValidationError("shift range: non-finite bound");
  }
  if (theta_max < 0.0 || theta_max > std::numbers::pi) {
    throw ValidationError("shift range: theta_max must lie in [0, pi]");
  }
  if (x_min > x_max || y_min > y_max) throw ValidationError("shift range: empty interval");
}

Transform make_transform(double theta, double x, double y) {
  if (!std::isfinite(theta) || !std::isfinite(x) || !std::isfinite(y)) {
    throw ValidationError("make_transform: non-finite input");
  }
  const double c = std::cos(theta), s = std::sin(theta);
  Transform t;
  t << c, -s, x,
       s,  c, y;
  return t;
}

Transform make_scale_translation(double scale, double x, double y) {
  Transform t;
  t << scale, 0.0, x,
       0.0, scale, y;
  return t;
}

Transform compose(const Transform& outer, const Transform& inner) {
  Transform out;
  out.leftCols<2>() = outer.leftCols<2>() * inner.leftCols<2>();
  out.col(2) = outer.leftCols<2>() * inner.col(2) + outer.col(2);
  return out;
}

Transform invert(const Transform& t) {
  const Eigen::Matrix2d inv = t.leftCols<2>().inverse();
  Transform out;
  out.leftCols<2>() = inv;
  out.col(2) = -inv * t.col(2);
  return out;
}

RigidShift to_rigid_shift(const Transform& t) {
  return RigidShift{std::atan2(t(1, 0), t(0, 0)), t(0, 2), t(1, 2)};
}

ShiftParams compose(const ShiftParams& outer, const ShiftParams& inner) {
  if (outer.bones.size() != inner.bones.size()) {
    throw ValidationError("compose: shift params cover different layer counts");
  }
  ShiftParams out = ShiftParams::identity(static_cast<int>(inner.bones.size()));
  for (std::size_t k = 0; k < inner.bones.size(); ++k) {
    out.bones[k] = to_rigid_shift(compose(make_transform(outer.bones[k]),
                                          make_transform(inner.bones[k])));
  }
  return out;
}

Eigen::Vector2d image_center(Eigen::Index rows, Eigen::Index cols) {
  return {0.5 * static_cast<double>(cols - 1), 0.5 * static_cast<double>(rows - 1)};
}

Eigen::Vector2d apply_transform(const Transform& t, const Eigen::Vector2d& point,
                                const Eigen::Vector2d& center) {
  return t.leftCols<2>() * (point - center) + t.col(2) + center;
}

WarpOperator warp_operator(Eigen::Index rows, Eigen::Index cols, const Transform& t,
                           Interpolation mode, const Eigen::Vector2d& center, EdgeMode edge) {
  const Eigen::Index n = rows * cols;
  const Transform inv = invert(t);
  std::vector<Eigen::Triplet<double>> taps;
  taps.reserve(static_cast<std::size_t>(n) * (mode == Interpolation::Bilinear ? 4 : 1));

  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::Index out = r * cols + c;
      const Eigen::Vector2d src =
          apply_transform(inv, Eigen::Vector2d(static_cast<double>(c), static_cast<double>(r)),
                          center);
      if (mode == Interpolation::Nearest) {
        auto sc = static_cast<Eigen::Index>(std::floor(src.x() + 0.5));
        auto sr = static_cast<Eigen::Index>(std::floor(src.y() + 0.5));
        if (edge == EdgeMode::Clamp) {
          sr = std::clamp<Eigen::Index>(sr, 0, rows - 1);
          sc = std::clamp<Eigen::Index>(sc, 0, cols - 1);
        }
        if (sr >= 0 && sr < rows && sc >= 0 && sc < cols) taps.emplace_back(out, sr * cols + sc, 1.0);
        continue;
      }
      const double fu = std::floor(src.x()), fv = std::floor(src.y());
      const double au = src.x() - fu, av = src.y() - fv;
      const auto u0 = static_cast<Eigen::Index>(fu), v0 = static_cast<Eigen::Index>(fv);
      const double w[4] = {(1 - au) * (1 - av), au * (1 - av), (1 - au) * av, au * av};
      const Eigen::Index du[4] = {0, 1, 0, 1};
      const Eigen::Index dv[4] = {0, 0, 1, 1};
      for (int k = 0; k < 4; ++k) {
        if (w[k] == 0.0) continue;
        Eigen::Index sr = v0 + dv[k], sc = u0 + du[k];
        if (edge == EdgeMode::Clamp) {
          sr = std::clamp<Eigen::Index>(sr, 0, rows - 1);
          sc = std::clamp<Eigen::Index>(sc, 0, cols - 1);
        }
        if (sr < 0 || sr >= rows || sc < 0 || sc >= cols) continue;
        taps.emplace_back(out, sr * cols + sc, w[k]);
      }
    }
  }
  WarpOperator op(n, n);
  op.setFromTriplets(taps.begin(), taps.end());
  return op;
}

WarpOperator warp_operator(Eigen::Index rows, Eigen::Index cols, const Transform& t,
                           Interpolation mode) {
  return warp_operator(rows, cols, t, mode, image_center(rows, cols));
}

Image warp(const Image& image, const WarpOperator& op) {
  Image out(image.rows(), image.cols());
  Eigen::Map<Eigen::VectorXd>(out.data(), out.size()) =
      op * Eigen::Map<const Eigen::VectorXd>(image.data(), image.size());
  return out;
}

Image warp_adjoint(const Image& image, const WarpOperator& op) {
  Image out(image.rows(), image.cols());
  Eigen::Map<Eigen::VectorXd>(out.data(), out.size()) =
      op.transpose() * Eigen::Map<const Eigen::VectorXd>(image.data(), image.size());
  return out;
}

Mask warp_mask(const Mask& mask, const Transform& t, const Eigen::Vector2d& center, EdgeMode edge) {
  const WarpOperator op = warp_operator(mask.rows(), mask.cols(), t, Interpolation::Nearest, center, edge);
  return warp(to_image(mask), op) >= 0.5;
}

Mask warp_mask(const Mask& mask, const Transform& t) {
  return warp_mask(mask, t, image_center(mask.rows(), mask.cols()));
}

bool clips_frame(const Mask& mask, const Transform& t, const Eigen::Vector2d& center) {
  const double umax = static_cast<double>(mask.cols()) - 0.5;
  const double vmax = static_cast<double>(mask.rows()) - 0.5;
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      const Eigen::Vector2d p = apply_transform(
          t, Eigen::Vector2d(static_cast<double>(c), static_cast<double>(r)), center);
      if (p.x() < -0.5 || p.x() >= umax || p.y() < -0.5 || p.y() >= vmax) return true;
    }
  }
  return false;
}

Image StackWarp::apply(int layer, const Image& image) const {
  if (layer == 0) return image;
  return warp(image, layer_ops[layer]) * shifted_masks[layer].cast<double>();
}

Image StackWarp::pull_back(int layer, const Image& grad) const {
  if (layer == 0) return grad;
  return warp_adjoint(grad * shifted_masks[layer].cast<double>(), layer_ops[layer]);
}

StackWarp build_stack_warp(std::span<const Mask> stack_masks, const ShiftParams& params) {
  const int layers = static_cast<int>(stack_masks.size());
  if (static_cast<int>(params.bones.size()) != layers - 1) {
    throw ValidationError("shift params cover " + std::to_string(params.bones.size()) +
                          " bones but the stack has " + std::to_string(layers - 1));
  }
  params.validate();
  const Eigen::Index rows = stack_masks[0].rows(), cols = stack_masks[0].cols();
  const Eigen::Vector2d center = image_center(rows, cols);

  StackWarp w;
  w.layer_ops.resize(layers);
  w.shifted_masks.resize(layers);
  w.shifted_masks[0] = stack_masks[0];
  for (int i = 1; i < layers; ++i) {
    const Transform t = make_transform(params.for_layer(i));
    w.layer_ops[i] = warp_operator(rows, cols, t, Interpolation::Bilinear, center);
    w.shifted_masks[i] = warp_mask(stack_masks[i], t, center);
    w.clipped = w.clipped || clips_frame(stack_masks[i], t, center);
  }
  return w;
}

ShiftedStack shift_stack(const LayerStack& stack, const ShiftParams& params) {
  const StackWarp w = build_stack_warp(stack.masks, params);
  ShiftedStack out;
  out.clipped = w.clipped;
  out.stack.masks = w.shifted_masks;
  out.stack.layers.reserve(stack.layers.size());
  for (int i = 0; i < stack.size(); ++i) out.stack.layers.push_back(w.apply(i, stack.layers[i]));
  return out;
}

std::vector<Mask> shift_masks(std::span<const Mask> masks, const ShiftParams& params) {
  const auto n = static_cast<std::size_t>(params.bones.size());
  if (masks.size() != n && masks.size() != n + 1) {
    throw ValidationError("shift_masks: expected " + std::to_string(n) + " or " +
                          std::to_string(n + 1) + " masks");
  }
  params.validate();
  const std::size_t offset = masks.size() - n;
  std::vector<Mask> out(masks.begin(), masks.end());
  for (std::size_t k = 0; k < n; ++k) {
    out[offset + k] = warp_mask(masks[offset + k], make_transform(params.bones[k]));
  }
  return out;
}

ShiftParams sample_shift(const ShiftRange& range, Rng& rng) {
  range.validate();
  ShiftParams p;
  for (auto& b : p.bones) {
    b.theta = rng.uniform(-range.theta_max, range.theta_max);
    b.dx = rng.uniform(range.x_min, range.x_max);
    b.dy = rng.uniform(range.y_min, range.y_max);
  }
  return p;
}

ShiftParams sample_shift(const ShiftRange& range) {
  Rng rng(range.seed);
  return sample_shift(range, rng);
}

}  // namespace layersep
