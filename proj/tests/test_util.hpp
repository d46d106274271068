#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "degenloop/numcore.hpp"
#include "degenloop/rng.hpp"

namespace degenloop::testing {

inline Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& v : m.data) v = scale * rng.normal();
  return m;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Textbook triple loop: out[i][j] = (sum_k x[i][k] * w[k][j]) + b[j].
inline Matrix naive_affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
  Matrix out(x.rows, w.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < w.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) acc += x(i, k) * w(k, j);
      out(i, j) = acc + b[j];
    }
  return out;
}

}  // namespace degenloop::testing
