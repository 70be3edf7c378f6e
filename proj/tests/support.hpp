#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles are
// written as plain scalar loops on purpose: they must not reuse the Eigen
// expressions of the code under test.

#include "layersep/image.hpp"
#include "layersep/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace testing_support {

using layersep::Image;
using layersep::Mask;

inline Image random_image(Eigen::Index rows, Eigen::Index cols, layersep::Rng& rng, double lo = 0.0,
                          double hi = 1.0) {
  Image out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = rng.uniform(lo, hi);
  return out;
}

inline Mask random_mask(Eigen::Index rows, Eigen::Index cols, layersep::Rng& rng, double p = 0.5) {
  Mask out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = rng.uniform() < p;
  return out;
}

/// Axis-aligned rectangle [r0, r1) x [c0, c1).
inline Mask rect_mask(Eigen::Index rows, Eigen::Index cols, Eigen::Index r0, Eigen::Index r1, Eigen::Index c0,
                      Eigen::Index c1) {
  Mask out = Mask::Constant(rows, cols, false);
  for (Eigen::Index r = r0; r < r1; ++r)
    for (Eigen::Index c = c0; c < c1; ++c) out(r, c) = true;
  return out;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) m = std::max(m, std::abs(a(r, c) - b(r, c)));
  return m;
}

inline bool masks_equal(const Mask& a, const Mask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (a(r, c) != b(r, c)) return false;
  return true;
}

/// Per-pixel compositing oracle.
inline Image composite_oracle(const std::vector<Image>& layers) {
  Image out(layers[0].rows(), layers[0].cols());
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      double t = 1.0;
      for (const auto& l : layers) t *= 1.0 - l(r, c);
      out(r, c) = 1.0 - t;
    }
  }
  return out;
}

inline double rmse_oracle(const Image& y, const Image& y_hat, const Mask* support = nullptr) {
  double s = 0.0;
  long n = 0;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      if (support && !(*support)(r, c)) continue;
      const double d = y(r, c) - y_hat(r, c);
      s += d * d;
      ++n;
    }
  }
  return std::sqrt(s / static_cast<double>(n));
}

inline double bce_oracle(const Image& y, const Mask& t, const Mask* support = nullptr) {
  double s = 0.0;
  long n = 0;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      if (support && !(*support)(r, c)) continue;
      const double p = std::clamp(y(r, c), 1e-7, 1.0 - 1e-7);
      s += t(r, c) ? -std::log(p) : -std::log(1.0 - p);
      ++n;
    }
  }
  return s / static_cast<double>(n);
}

inline double mse_oracle(const Image& a, const Image& b) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) s += (a(r, c) - b(r, c)) * (a(r, c) - b(r, c));
  return s / static_cast<double>(a.size());
}

/// SSIM computed window by window with the full 2-D Gaussian, no separability.
inline double ssim_oracle(const Image& a, const Image& b, int window = 11, double sigma = 1.5) {
  const int half = window / 2;
  std::vector<double> w(window * window);
  double total = 0.0;
  for (int i = 0; i < window; ++i) {
    for (int j = 0; j < window; ++j) {
      const double di = i - half, dj = j - half;
      w[i * window + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      total += w[i * window + j];
    }
  }
  for (double& x : w) x /= total;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0.0;
  long count = 0;
  for (Eigen::Index r = 0; r + window <= a.rows(); ++r) {
    for (Eigen::Index c = 0; c + window <= a.cols(); ++c) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < window; ++i) {
        for (int j = 0; j < window; ++j) {
          const double k = w[i * window + j];
          const double x = a(r + i, c + j), y = b(r + i, c + j);
          ma += k * x;
          mb += k * y;
          saa += k * x * x;
          sbb += k * y * y;
          sab += k * x * y;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

/// Dense direct solve of the same discrete system: for every region pixel,
/// sum over in-frame neighbours (u(q) - u(p)) = 0, non-region values fixed.
inline Image direct_solve(const Image& boundary, const Mask& region) {
  std::map<Eigen::Index, int> index;
  for (Eigen::Index p = 0; p < region.size(); ++p)
    if (region(p)) index.emplace(p, static_cast<int>(index.size()));
  const int n = static_cast<int>(index.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  const Eigen::Index rows = region.rows(), cols = region.cols();
  for (const auto& [p, i] : index) {
    const Eigen::Index r = p / cols, c = p % cols;
    const Eigen::Index nr[4] = {r - 1, r + 1, r, r};
    const Eigen::Index nc[4] = {c, c, c - 1, c + 1};
    for (int k = 0; k < 4; ++k) {
      if (nr[k] < 0 || nr[k] >= rows || nc[k] < 0 || nc[k] >= cols) continue;
      const Eigen::Index q = nr[k] * cols + nc[k];
      a(i, i) -= 1.0;
      if (region(q)) a(i, index.at(q)) += 1.0;
      else b(i) -= boundary(q);
    }
  }
  const Eigen::VectorXd x = a.fullPivLu().solve(b);
  Image out = boundary;
  for (const auto& [p, i] : index) out(p) = x(i);
  return out;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    layersep::Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(
                                                            std::chrono::steady_clock::now().time_since_epoch().count()));
    path_ = std::filesystem::temp_directory_path() / ("layersep_" + tag + "_" + std::to_string(rng.next() % 1000000007));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
