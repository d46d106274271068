#pragma once

// Sample-set distances used to measure degeneration against held-out data.
// Every routine treats its inputs as unordered sets of rows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "degenloop/errors.hpp"
#include "degenloop/numcore.hpp"
#include "degenloop/rng.hpp"

namespace degenloop {

namespace detail {

inline void require_pair(const Matrix& x, const Matrix& y, const char* what) {
  if (x.rows == 0 || y.rows == 0) throw DomainError(std::string(what) + ": empty sample set");
  if (x.cols != y.cols)
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(x.cols) + " vs " + std::to_string(y.cols));
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

// Sum of exp(-|a-b|^2 / (2 h^2)) over all row pairs.
inline double kernel_sum(const Matrix& a, const Matrix& b, double inv_two_h2) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const auto ai = a.row(i);
    double row_sum = 0.0;
    for (std::size_t j = 0; j < b.rows; ++j) row_sum += std::exp(-squared_distance(ai, b.row(j)) * inv_two_h2);
    total += row_sum;
  }
  return total;
}

}  // namespace detail

// Median of the pairwise Euclidean distances over the pooled rows of x and y
// (average of the two middle values for an even count). Falls back to 1 when
// the median is zero.
inline double median_heuristic_bandwidth(const Matrix& x, const Matrix& y) {
  detail::require_pair(x, y, "median_heuristic_bandwidth");
  std::vector<std::span<const double>> rows;
  rows.reserve(x.rows + y.rows);
  for (std::size_t i = 0; i < x.rows; ++i) rows.push_back(x.row(i));
  for (std::size_t i = 0; i < y.rows; ++i) rows.push_back(y.row(i));
  if (rows.size() < 2) return 1.0;
  std::vector<double> d;
  d.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) d.push_back(detail::distance(rows[i], rows[j]));
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (lower + med);
  }
  return med > 0.0 ? med : 1.0;
}

// Biased (V-statistic) squared MMD with the Gaussian kernel
// k(a, b) = exp(-|a-b|^2 / (2 h^2)). Without an explicit bandwidth h the
// median heuristic on the pooled set is used.
inline double mmd_rbf(const Matrix& x, const Matrix& y, std::optional<double> bandwidth = std::nullopt) {
  detail::require_pair(x, y, "mmd_rbf");
  const double h = bandwidth ? *bandwidth : median_heuristic_bandwidth(x, y);
  if (!(h > 0.0)) throw DomainError("mmd_rbf: bandwidth must be > 0");
  const double g = 1.0 / (2.0 * h * h);
  const double nx = static_cast<double>(x.rows), ny = static_cast<double>(y.rows);
  const double kxx = detail::kernel_sum(x, x, g) / (nx * nx);
  const double kyy = detail::kernel_sum(y, y, g) / (ny * ny);
  const double kxy = detail::kernel_sum(x, y, g) / (nx * ny);
  return std::max(0.0, kxx + kyy - 2.0 * kxy);
}

// W1 distance between two empirical 1-D distributions, computed by
// integrating |F^-1(u) - G^-1(u)| over u with both inputs sorted.
inline double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("wasserstein1_1d: empty sample set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  // Walk the merged quantile breakpoints i/na and j/nb.
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < a.size() && j < b.size()) {
    const double ua = static_cast<double>(i + 1) / na, ub = static_cast<double>(j + 1) / nb;
    const double next = std::min(ua, ub);
    total += (next - u) * std::abs(a[i] - b[j]);
    u = next;
    if (ua <= ub) ++i;
    if (ub <= ua) ++j;
  }
  return total;
}

// Projection directions: normalized standard-normal vectors from the
// ("sliced-wasserstein") stream of `seed`.
inline Matrix random_unit_directions(std::size_t count, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed, "sliced-wasserstein");
  Matrix dirs(count, dim);
  for (std::size_t p = 0; p < count; ++p) {
    auto row = dirs.row(p);
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& v : row) {
        v = rng.normal();
        norm2 += v * v;
      }
    } while (norm2 == 0.0);
    const double norm = std::sqrt(norm2);
    for (auto& v : row) v /= norm;
  }
  return dirs;
}

inline double sliced_wasserstein(const Matrix& x, const Matrix& y, std::size_t n_projections = 128,
                                 std::uint64_t seed = 0) {
  detail::require_pair(x, y, "sliced_wasserstein");
  if (n_projections < 1) throw DomainError("sliced_wasserstein: n_projections must be >= 1");
  const Matrix dirs = random_unit_directions(n_projections, x.cols, seed);
  auto project = [](const Matrix& m, std::span<const double> dir) {
    std::vector<double> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
      const auto r = m.row(i);
      double s = 0.0;
      for (std::size_t k = 0; k < dir.size(); ++k) s += r[k] * dir[k];
      out[i] = s;
    }
    return out;
  };
  double total = 0.0;
  for (std::size_t p = 0; p < n_projections; ++p) total += wasserstein1_1d(project(x, dirs.row(p)), project(y, dirs.row(p)));
  return total / static_cast<double>(n_projections);
}

// Fraction of centers with at least one sample within 3 sigma.
inline double mode_coverage(const Matrix& samples, const Matrix& centers, double sigma) {
  if (centers.rows == 0) throw DomainError("mode_coverage: no mode centers");
  if (samples.rows > 0 && samples.cols != centers.cols) throw DimensionError("mode_coverage: dimension mismatch");
  const double r2 = 9.0 * sigma * sigma;
  std::size_t covered = 0;
  for (std::size_t c = 0; c < centers.rows; ++c) {
    for (std::size_t i = 0; i < samples.rows; ++i) {
      if (detail::squared_distance(samples.row(i), centers.row(c)) <= r2) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(centers.rows);
}

// Mean Euclidean distance over unordered pairs.
inline double mean_pairwise_distance(const Matrix& x) {
  if (x.rows < 2) throw DomainError("mean_pairwise_distance: need at least 2 samples");
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = i + 1; j < x.rows; ++j) row_sum += detail::distance(x.row(i), x.row(j));
    total += row_sum;
  }
  const double n = static_cast<double>(x.rows);
  return total / (n * (n - 1.0) / 2.0);
}

// Mean over generated rows of the distance to the closest real row.
inline double nn_distance_to_real(const Matrix& generated, const Matrix& real) {
  detail::require_pair(generated, real, "nn_distance_to_real");
  double total = 0.0;
  for (std::size_t i = 0; i < generated.rows; ++i) {
    double best = detail::squared_distance(generated.row(i), real.row(0));
    for (std::size_t j = 1; j < real.rows; ++j) best = std::min(best, detail::squared_distance(generated.row(i), real.row(j)));
    total += std::sqrt(best);
  }
  return total / static_cast<double>(generated.rows);
}

struct ModeSet {
  Matrix centers;
  double sigma = 1.0;
};

struct MetricReport {
  double mmd_rbf = 0.0;
  double sliced_wasserstein = 0.0;
  double mean_pairwise_distance = 0.0;
  // Absent when the reference data has no known mode structure.
  std::optional<double> mode_coverage;
  double nn_distance_to_real = 0.0;

  bool operator==(const MetricReport&) const = default;
};

struct MetricOptions {
  std::optional<double> bandwidth;
  std::size_t n_projections = 128;
  std::uint64_t projection_seed = 0;
};

inline MetricReport evaluate_metrics(const Matrix& generated, const Matrix& real, const std::optional<ModeSet>& modes = {},
                                     const MetricOptions& opt = {}) {
  MetricReport r;
  r.mmd_rbf = mmd_rbf(generated, real, opt.bandwidth);
  r.sliced_wasserstein = sliced_wasserstein(generated, real, opt.n_projections, opt.projection_seed);
  r.mean_pairwise_distance = generated.rows >= 2 ? mean_pairwise_distance(generated) : 0.0;
  if (modes) r.mode_coverage = mode_coverage(generated, modes->centers, modes->sigma);
  r.nn_distance_to_real = nn_distance_to_real(generated, real);
  return r;
}

}  // namespace degenloop
