#pragma once

#include <cstddef>

namespace layersep {

/// Pairwise summation in a fixed row-major order, so reductions agree
/// bit-for-bit across runs and thread counts.
inline double pairwise_sum(const double* data, std::size_t n) {
  if (n <= 16) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += data[i];
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

template <typename Derived>
double pairwise_sum(const Derived& array) {
  // Evaluates into a row-major temporary to pin the traversal order.
  const typename Derived::PlainObject plain = array;
  return pairwise_sum(plain.data(), static_cast<std::size_t>(plain.size()));
}

}  // namespace layersep
