#pragma once

// The generational self-consumption loop:
//
//   for g = 1..n:
//     train V_g from scratch (or warm-started) on the current pool
//     draw fresh evaluation samples from V_g and score them against held-out
//       real data
//     if g < n: draw round(alpha * |pool|) samples from V_g and append them
//       to the pool as generation g
//
// All randomness is derived from the master seed through labelled streams
// ("dataset", "holdout", "init-g<g>", "train-g<g>", "inject-g<g>",
// "eval-g<g>", "projections"). Runs that differ only in alpha therefore share
// the original data, the generation-1 model and their random draws.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "degenloop/config.hpp"
#include "degenloop/datapool.hpp"
#include "degenloop/datasets.hpp"
#include "degenloop/diffusion.hpp"
#include "degenloop/errors.hpp"
#include "degenloop/metrics.hpp"
#include "degenloop/rng.hpp"

namespace degenloop {

struct GenerationReport {
  int generation = 0;
  std::size_t pool_size = 0;
  double real_fraction = 0.0;
  std::optional<double> final_train_loss;  // absent when epochs == 0
  MetricReport metrics{};
  std::map<int, std::size_t> pool_composition;
  // Samples appended after this generation (0 for the last one).
  std::size_t injected = 0;
  std::optional<std::string> injection_warning;
  bool diverged = false;
  std::string divergence_message;
  double wall_seconds = 0.0;
  Matrix samples;  // evaluation samples in data space
};

struct EvolutionReport {
  EvolutionConfig config;
  std::vector<GenerationReport> generations;

  bool diverged() const { return !generations.empty() && generations.back().diverged; }
};

inline std::string generation_label(const char* purpose, int g) { return std::string(purpose) + "-g" + std::to_string(g); }

// Original training data and held-out evaluation data. Synthetic kinds
// draw both from the same DatasetSpec with different seeds; external data
// is split by a seeded permutation (held-out part = min(eval_set_size, n/2)).
struct ExperimentData {
  Matrix original;
  Matrix holdout;
  std::optional<ModeSet> modes;
};

inline ExperimentData prepare_data(const EvolutionConfig& cfg) {
  ExperimentData d;
  d.modes = dataset_modes(cfg.dataset);
  if (cfg.dataset.kind == DatasetKind::external) {
    const Matrix all = load_external_features(cfg.dataset.external.path, cfg.dataset.external.format);
    if (all.rows < 2) throw ConfigError("external dataset needs at least 2 samples");
    std::vector<std::size_t> order(all.rows);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(cfg.master_seed, "holdout");
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const std::size_t hold = std::min(cfg.eval_set_size, all.rows / 2);
    d.holdout = Matrix(hold, all.cols);
    d.original = Matrix(all.rows - hold, all.cols);
    for (std::size_t i = 0; i < all.rows; ++i) {
      const auto src = all.row(order[i]);
      auto dst = i < hold ? d.holdout.row(i) : d.original.row(i - hold);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    return d;
  }
  DatasetSpec train_spec = cfg.dataset;
  train_spec.seed = derive_seed(cfg.master_seed, "dataset");
  DatasetSpec hold_spec = cfg.dataset;
  hold_spec.seed = derive_seed(cfg.master_seed, "holdout");
  hold_spec.size = cfg.eval_set_size;
  d.original = generate_features(train_spec);
  d.holdout = generate_features(hold_spec);
  return d;
}

namespace detail {

inline FeaturePredicate skew_predicate(const EvolutionConfig& cfg, const ExperimentData& data) {
  const std::size_t target = cfg.skew->target_mode;
  if (cfg.dataset.kind == DatasetKind::gaussian_ring) {
    const RingParams ring = cfg.dataset.ring;
    return [ring, target](std::span<const double> x) { return nearest_ring_mode(ring, x) == target; };
  }
  const Matrix centers = data.modes->centers;
  return [centers, target](std::span<const double> x) {
    std::size_t best = 0;
    double best_d = squared_distance(x, centers.row(0));
    for (std::size_t m = 1; m < centers.rows; ++m) {
      const double d = squared_distance(x, centers.row(m));
      if (d < best_d) {
        best_d = d;
        best = m;
      }
    }
    return best == target;
  };
}

}  // namespace detail

inline EvolutionReport run_evolution(const EvolutionConfig& cfg, const ExperimentData& data) {
  cfg.validate();
  EvolutionReport report{cfg, {}};
  const std::uint64_t seed = cfg.master_seed;
  MetricOptions mopt{cfg.bandwidth, cfg.n_projections, derive_seed(cfg.master_seed, "projections")};

  // Input width follows the data.
  DenoiserArch arch = cfg.model;
  arch.data_dim = data.original.cols;
  DataPool pool = DataPool::from_real(data.original);
  std::optional<DenoiserParams> previous;
  std::optional<FeaturePredicate> keep;
  if (cfg.skew) keep = detail::skew_predicate(cfg, data);

  for (int g = 1; g <= static_cast<int>(cfg.generations); ++g) {
    const auto t0 = std::chrono::steady_clock::now();
    GenerationReport gr;
    gr.generation = g;
    gr.pool_size = pool.size();
    gr.real_fraction = pool.real_fraction();
    gr.pool_composition = pool.generation_counts();

    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, generation_label("train", g));
    tc.init_seed = derive_seed(seed, generation_label("init", g));
    TrainResult trained;
    try {
      trained = train_denoiser(pool, arch, tc, cfg.schedule,
                               cfg.warm_start && previous ? &*previous : nullptr);
    } catch (const TrainingDiverged& e) {
      gr.diverged = true;
      gr.divergence_message = e.what();
      gr.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      report.generations.push_back(std::move(gr));
      return report;
    }
    if (!trained.loss_history.empty()) gr.final_train_loss = trained.loss_history.back();

    SampleRequest eval_req{cfg.eval_samples, cfg.sample_steps, derive_seed(seed, generation_label("eval", g))};
    gr.samples = ddim_sample(trained.params, cfg.schedule, eval_req);
    if (!all_finite(gr.samples.data)) {
      gr.diverged = true;
      gr.divergence_message = "non-finite samples from generation " + std::to_string(g);
      report.generations.push_back(std::move(gr));
      return report;
    }
    gr.metrics = evaluate_metrics(gr.samples, data.holdout, data.modes, mopt);

    if (g < static_cast<int>(cfg.generations)) {
      const std::size_t want = plan_injection(pool.size(), cfg.alpha);
      const std::uint64_t inject_seed = derive_seed(seed, generation_label("inject", g));
      if (want > 0) {
        if (keep) {
          auto draw = [&](std::size_t n, std::size_t round) {
            SampleRequest r{n, cfg.sample_steps, derive_seed(inject_seed, "round-" + std::to_string(round))};
            return ddim_sample(trained.params, cfg.schedule, r);
          };
          SkewedInjection sk = inject_skewed(pool, draw, *keep, g, want, cfg.skew->max_rounds);
          gr.injected = sk.achieved;
          gr.injection_warning = sk.warning;
          pool = std::move(sk.pool);
        } else {
          SampleRequest r{want, cfg.sample_steps, inject_seed};
          const Matrix fresh = ddim_sample(trained.params, cfg.schedule, r);
          if (!all_finite(fresh.data)) {
            gr.diverged = true;
            gr.divergence_message = "non-finite injection samples from generation " + std::to_string(g);
            report.generations.push_back(std::move(gr));
            return report;
          }
          pool.append(fresh, g);
          gr.injected = want;
        }
      }
    }
    previous = std::move(trained.params);
    gr.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.generations.push_back(std::move(gr));
  }
  return report;
}

inline EvolutionReport run_evolution(const EvolutionConfig& cfg) {
  cfg.validate();
  return run_evolution(cfg, prepare_data(cfg));
}

// Worker count: DEGENLOOP_THREADS if set and > 0, else the hardware
// concurrency (at least 1).
inline std::size_t worker_threads() {
  if (const char* env = std::getenv("DEGENLOOP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs `task(i)` for i in [0, count) on up to `threads` workers. Results
// must be written to per-index slots; the first exception is rethrown.
template <class Task>
void parallel_for_index(std::size_t count, std::size_t threads, Task&& task) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// One independent evolution per alpha over shared original and held-out
// data. Runs execute concurrently up to worker_threads(); the reports do not
// depend on the thread count.
inline std::vector<EvolutionReport> run_alpha_sweep(const EvolutionConfig& base, const std::vector<double>& alphas) {
  if (alphas.empty()) throw ConfigError("run_alpha_sweep: no alpha values");
  base.validate();
  for (double a : alphas)
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("run_alpha_sweep: alpha must be a finite value >= 0");
  const ExperimentData data = prepare_data(base);
  std::vector<EvolutionReport> out(alphas.size());
  parallel_for_index(alphas.size(), worker_threads(), [&](std::size_t i) {
    EvolutionConfig cfg = base;
    cfg.alpha = alphas[i];
    out[i] = run_evolution(cfg, data);
  });
  return out;
}

}  // namespace degenloop
