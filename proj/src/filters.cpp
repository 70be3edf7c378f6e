#include "layersep/filters.hpp"

#include <algorithm>
#include <cmath>

namespace layersep {

void validate_image(const Image& image, const char* what) {
  if (image.size() == 0) throw ValidationError(std::string(what) + ": empty image");
  if (!image.allFinite()) throw ValidationError(std::string(what) + ": non-finite value");
  if (image.minCoeff() < 0.0 || image.maxCoeff() > 1.0) {
    throw ValidationError(std::string(what) + ": values outside [0, 1]");
  }
}

void validate_stack(const LayerStack& stack) {
  if (stack.size() != kNumLayers) {
    throw ValidationError("layer stack must hold " + std::to_string(kNumLayers) +
                          " layers, got " + std::to_string(stack.size()));
  }
  if (stack.masks.size() != stack.layers.size()) {
    throw ValidationError("layer stack: mask count does not match layer count");
  }
  for (int i = 0; i < stack.size(); ++i) {
    validate_image(stack.layers[i], "layer");
    require_same_shape(stack.layers[0], stack.layers[i], "layer stack");
    require_same_shape(stack.layers[i], stack.masks[i], "layer stack mask");
    if (i >= 1 && ((!stack.masks[i]) && (stack.layers[i] != 0.0)).any()) {
      throw ValidationError("layer " + std::to_string(i) + " is non-zero outside its mask");
    }
  }
}

Mask mask_intersection(std::span<const Mask> masks) {
  if (masks.empty()) throw ValidationError("mask_intersection: empty list");
  Mask out = masks[0];
  for (const auto& m : masks.subspan(1)) {
    require_same_shape(out, m, "mask_intersection");
    out = out && m;
  }
  return out;
}

Mask mask_union(std::span<const Mask> masks) {
  if (masks.empty()) throw ValidationError("mask_union: empty list");
  Mask out = masks[0];
  for (const auto& m : masks.subspan(1)) {
    require_same_shape(out, m, "mask_union");
    out = out || m;
  }
  return out;
}

Image apply_mask(const Image& image, const Mask& mask) {
  require_same_shape(image, mask, "apply_mask");
  return image * mask.cast<double>();
}

Mask dilation_ring(const Mask& mask, int radius) {
  const Eigen::Index rows = mask.rows(), cols = mask.cols();
  Mask dilated = mask;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!mask(r, c)) continue;
      const Eigen::Index r0 = std::max<Eigen::Index>(0, r - radius);
      const Eigen::Index r1 = std::min<Eigen::Index>(rows - 1, r + radius);
      const Eigen::Index c0 = std::max<Eigen::Index>(0, c - radius);
      const Eigen::Index c1 = std::min<Eigen::Index>(cols - 1, c + radius);
      dilated.block(r0, c0, r1 - r0 + 1, c1 - c0 + 1) = true;
    }
  }
  return dilated && !mask;
}

namespace {

template <typename Pred>
Mask four_neighbour_select(const Mask& mask, bool want_inside, Pred&& neighbour_test) {
  const Eigen::Index rows = mask.rows(), cols = mask.cols();
  Mask out = empty_mask(rows, cols);
  constexpr int dr[] = {-1, 1, 0, 0};
  constexpr int dc[] = {0, 0, -1, 1};
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (mask(r, c) != want_inside) continue;
      for (int k = 0; k < 4; ++k) {
        const Eigen::Index rr = r + dr[k], cc = c + dc[k];
        if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
        if (neighbour_test(mask(rr, cc))) {
          out(r, c) = true;
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace

Mask outer_ring(const Mask& mask) {
  return four_neighbour_select(mask, false, [](bool v) { return v; });
}

Mask inner_ring(const Mask& mask) {
  return four_neighbour_select(mask, true, [](bool v) { return !v; });
}

Eigen::ArrayXd gaussian_kernel(double sigma, int radius) {
  Eigen::ArrayXd k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k(i + radius) = std::exp(-0.5 * i * i / (sigma * sigma));
  return k / k.sum();
}

Image gaussian_blur(const Image& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const Eigen::ArrayXd k = gaussian_kernel(sigma, radius);
  const Eigen::Index rows = image.rows(), cols = image.cols();

  Image tmp(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const Eigen::Index cc = std::clamp<Eigen::Index>(c + i, 0, cols - 1);
        acc += k(i + radius) * image(r, cc);
      }
      tmp(r, c) = acc;
    }
  }
  Image out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const Eigen::Index rr = std::clamp<Eigen::Index>(r + i, 0, rows - 1);
        acc += k(i + radius) * tmp(rr, c);
      }
      out(r, c) = acc;
    }
  }
  return out;
}

Image box_filter(const Image& image, int radius) {
  const Eigen::Index rows = image.rows(), cols = image.cols();
  const double norm = 1.0 / ((2.0 * radius + 1) * (2.0 * radius + 1));
  Image tmp = Image::Zero(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (Eigen::Index cc = std::max<Eigen::Index>(0, c - radius);
           cc <= std::min<Eigen::Index>(cols - 1, c + radius); ++cc) {
        acc += image(r, cc);
      }
      tmp(r, c) = acc;
    }
  }
  Image out = Image::Zero(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (Eigen::Index rr = std::max<Eigen::Index>(0, r - radius);
           rr <= std::min<Eigen::Index>(rows - 1, r + radius); ++rr) {
        acc += tmp(rr, c);
      }
      out(r, c) = acc * norm;
    }
  }
  return out;
}

Image logistic(const Image& x) { return 1.0 / (1.0 + (-x).exp()); }

Image logit(const Image& p) {
  const Image q = p.max(1e-9).min(1.0 - 1e-9);
  return (q / (1.0 - q)).log();
}

}  // namespace layersep
