#pragma once

// Provenance-tracked, append-only training pool.
//
// Generation 0 holds the original (real) data; generation g >= 1 holds
// samples emitted by model V_g. Each evolution step injects
// round(alpha * |pool|) samples from the newest model, so under exact
// arithmetic |pool_g| = (1 + alpha)^(g-1) * |pool_1| and the real fraction
// is (1 + alpha)^-(g-1).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "degenloop/errors.hpp"
#include "degenloop/numcore.hpp"

namespace degenloop {

enum class SampleKind { real, synthetic };

struct Sample {
  std::vector<double> features;
  int generation = 0;
  SampleKind kind = SampleKind::real;

  bool operator==(const Sample&) const = default;
};

class DataPool {
 public:
  DataPool() = default;
  explicit DataPool(std::size_t dimension) : dimension_(dimension) {}

  // Wraps the rows of `features` as generation-0 samples.
  static DataPool from_real(const Matrix& features) {
    DataPool pool(features.cols);
    pool.append(features, 0);
    return pool;
  }

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::vector<Sample>& samples() const { return samples_; }
  const std::map<int, std::size_t>& generation_counts() const { return counts_; }

  int max_generation() const { return counts_.empty() ? -1 : counts_.rbegin()->first; }

  // Appends rows of `rows` with provenance `generation`. Generation 0 may be
  // appended only while no synthetic data exists; synthetic generations must
  // be exactly one past the newest one present.
  void append(const Matrix& rows, int generation) {
    if (rows.rows == 0) return;
    if (rows.cols != dimension_)
      throw DimensionError("DataPool: sample dimension " + std::to_string(rows.cols) + " != pool dimension " +
                           std::to_string(dimension_));
    if (generation < 0) throw ConfigError("DataPool: negative generation index");
    if (generation == 0) {
      if (max_generation() > 0) throw ConfigError("DataPool: real samples cannot follow synthetic ones");
    } else if (generation != max_generation() + 1) {
      throw ConfigError("DataPool: generation " + std::to_string(generation) + " must be " +
                        std::to_string(max_generation() + 1));
    }
    if (!all_finite(rows.data)) throw DomainError("DataPool: non-finite features");
    samples_.reserve(samples_.size() + rows.rows);
    for (std::size_t i = 0; i < rows.rows; ++i) {
      const auto r = rows.row(i);
      samples_.push_back(Sample{{r.begin(), r.end()}, generation,
                                generation == 0 ? SampleKind::real : SampleKind::synthetic});
    }
    counts_[generation] += rows.rows;
  }

  Matrix features() const {
    Matrix m(samples_.size(), dimension_);
    for (std::size_t i = 0; i < samples_.size(); ++i)
      std::copy(samples_[i].features.begin(), samples_[i].features.end(), m.row(i).begin());
    return m;
  }

  double real_fraction() const {
    if (samples_.empty()) return 0.0;
    const auto it = counts_.find(0);
    const std::size_t real = it == counts_.end() ? 0 : it->second;
    return static_cast<double>(real) / static_cast<double>(samples_.size());
  }

  bool operator==(const DataPool&) const = default;

 private:
  std::size_t dimension_ = 0;
  std::vector<Sample> samples_;
  std::map<int, std::size_t> counts_;
};

// round(alpha * pool_size), ties rounded half up.
inline std::size_t plan_injection(std::size_t pool_size, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("plan_injection: alpha must be a finite value >= 0");
  if (pool_size < 1) throw ConfigError("plan_injection: pool must be non-empty");
  return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(pool_size) + 0.5));
}

// Real fraction of the pool that trains V_g under exact growth.
inline double real_fraction_closed_form(double alpha, int generation) {
  if (generation < 1) throw DomainError("real_fraction_closed_form: generation must be >= 1");
  return std::pow(1.0 + alpha, -(generation - 1));
}

inline DataPool inject(const DataPool& pool, const Matrix& new_samples, int generation) {
  DataPool out = pool;
  out.append(new_samples, generation);
  return out;
}

// Class-concentrated injection: candidates are drawn from `draw(n, round)`
// and only rows passing `keep` are retained, until `target` rows are kept or
// `max_rounds` draws have been made. Each round asks for the outstanding
// count scaled by the empirical rejection rate so far.
struct SkewedInjection {
  DataPool pool;
  std::size_t target = 0;
  std::size_t achieved = 0;
  std::size_t candidates_drawn = 0;
  std::optional<std::string> warning;
};

using CandidateSource = std::function<Matrix(std::size_t count, std::size_t round)>;
using FeaturePredicate = std::function<bool(std::span<const double>)>;

inline SkewedInjection inject_skewed(const DataPool& pool, const CandidateSource& draw, const FeaturePredicate& keep,
                                     int generation, std::size_t target, std::size_t max_rounds = 8) {
  SkewedInjection r{pool, target, 0, 0, std::nullopt};
  std::vector<double> kept;
  std::size_t accepted_total = 0;
  for (std::size_t round = 0; round < max_rounds && accepted_total < target; ++round) {
    const std::size_t need = target - accepted_total;
    std::size_t ask = need;
    if (r.candidates_drawn > 0) {
      // Oversample by the observed acceptance rate (at least 1/64 assumed).
      const double rate = std::max(static_cast<double>(accepted_total) / static_cast<double>(r.candidates_drawn),
                                   1.0 / 64.0);
      ask = static_cast<std::size_t>(std::ceil(static_cast<double>(need) / rate));
    }
    const Matrix cand = draw(ask, round);
    if (cand.rows > 0 && cand.cols != pool.dimension())
      throw DimensionError("inject_skewed: candidate dimension mismatch");
    r.candidates_drawn += cand.rows;
    for (std::size_t i = 0; i < cand.rows && accepted_total < target; ++i) {
      if (!keep(cand.row(i))) continue;
      const auto row = cand.row(i);
      kept.insert(kept.end(), row.begin(), row.end());
      ++accepted_total;
    }
  }
  r.achieved = accepted_total;
  if (accepted_total > 0) r.pool.append(Matrix(accepted_total, pool.dimension(), std::move(kept)), generation);
  if (accepted_total < target)
    r.warning = "inject_skewed: partial injection, " + std::to_string(accepted_total) + " of " +
                std::to_string(target) + " samples after " + std::to_string(r.candidates_drawn) + " candidates";
  return r;
}

struct GenerationStats {
  int generation = 0;
  std::size_t count = 0;
  std::vector<double> feature_mean;
};

struct PoolStats {
  std::size_t size = 0;
  double real_fraction = 0.0;
  std::vector<GenerationStats> generations;
};

inline PoolStats pool_stats(const DataPool& pool) {
  PoolStats s;
  s.size = pool.size();
  s.real_fraction = pool.empty() ? 0.0 : pool.real_fraction();
  std::map<int, GenerationStats> by_gen;
  for (const auto& [g, c] : pool.generation_counts())
    by_gen[g] = GenerationStats{g, c, std::vector<double>(pool.dimension(), 0.0)};
  for (const auto& smp : pool.samples()) {
    auto& acc = by_gen[smp.generation].feature_mean;
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += smp.features[j];
  }
  for (auto& [g, gs] : by_gen) {
    for (auto& v : gs.feature_mean) v /= static_cast<double>(gs.count);
    s.generations.push_back(std::move(gs));
  }
  return s;
}

}  // namespace degenloop
