#pragma once

// Reference implementations written independently of the library code paths.

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "foldgraph/dense.hpp"

namespace foldgraph::testing {

/// Mean nearest-neighbour distance from every row of `from` into `to`, by direct double loop.
inline double brute_directional(const Matrix& from, const Matrix& to) {
  double total = 0.0;
  for (std::size_t i = 0; i < from.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < to.rows(); ++j) {
      const double dx = from(i, 0) - to(j, 0);
      const double dy = from(i, 1) - to(j, 1);
      const double dz = from(i, 2) - to(j, 2);
      const double d2 = dx * dx + dy * dy + dz * dz;
      if (d2 < best) best = d2;
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(from.rows());
}

inline double brute_augmented_chamfer(const Matrix& s, const Matrix& r) {
  const double f = brute_directional(s, r), b = brute_directional(r, s);
  return f > b ? f : b;
}

inline double brute_chamfer(const Matrix& s, const Matrix& r) {
  return brute_directional(s, r) + brute_directional(r, s);
}

}  // namespace foldgraph::testing
