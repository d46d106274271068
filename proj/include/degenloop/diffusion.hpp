#pragma once

// Continuous-time DDIM with an MLP noise predictor.
//
// Forward (noising) process at diffusion time t in [0, 1]:
//   x_t = signal_rate(t) * x_0 + noise_rate(t) * eps,   eps ~ N(0, I)
// with a cosine-angle schedule so that signal^2 + noise^2 = 1 exactly in
// exact arithmetic. The network sees [x_t, embed(noise_rate^2)] and predicts
// eps. Sampling runs the deterministic DDIM reverse process from pure noise.
//
// Data is standardized per feature before training; the fitted mean/std are
// part of the model and are undone when sampling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "degenloop/datapool.hpp"
#include "degenloop/errors.hpp"
#include "degenloop/numcore.hpp"
#include "degenloop/rng.hpp"

namespace degenloop {

struct DiffusionRates {
  double signal = 1.0;
  double noise = 0.0;
};

struct DiffusionSchedule {
  double max_signal_rate = 0.95;
  double min_signal_rate = 0.02;

  void validate() const {
    if (!(max_signal_rate > 0.0 && max_signal_rate <= 1.0))
      throw ConfigError("DiffusionSchedule: max_signal_rate must be in (0, 1]");
    if (!(min_signal_rate > 0.0 && min_signal_rate < max_signal_rate))
      throw ConfigError("DiffusionSchedule: min_signal_rate must be in (0, max_signal_rate)");
  }

  double start_angle() const { return std::acos(max_signal_rate); }
  double end_angle() const { return std::acos(min_signal_rate); }
};

inline DiffusionRates schedule_rates(const DiffusionSchedule& sched, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("schedule_rates: t must be in [0, 1], got " + std::to_string(t));
  const double start = sched.start_angle();
  const double angle = start + t * (sched.end_angle() - start);
  return {std::cos(angle), std::sin(angle)};
}

// ---------------------------------------------------------------------------
// Sinusoidal embedding of a scalar in [0, 1]: the first half are sines and the
// second half cosines of 2*pi*f*t for geometrically spaced f.

struct TimeEmbedding {
  std::size_t dim = 16;
  double min_frequency = 1.0;
  double max_frequency = 1000.0;

  std::vector<double> frequencies() const {
    const std::size_t half = dim / 2;
    std::vector<double> f(half);
    if (half == 1) {
      f[0] = min_frequency;
      return f;
    }
    const double lo = std::log(min_frequency), hi = std::log(max_frequency);
    for (std::size_t k = 0; k < half; ++k)
      f[k] = std::exp(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(half - 1));
    return f;
  }

  void embed_into(double t, std::span<const double> freqs, std::span<double> out) const {
    const std::size_t half = freqs.size();
    for (std::size_t k = 0; k < half; ++k) {
      const double a = 2.0 * std::numbers::pi * freqs[k] * t;
      out[k] = std::sin(a);
      out[half + k] = std::cos(a);
    }
  }

  std::vector<double> operator()(double t) const {
    std::vector<double> out(dim, 0.0);
    const auto f = frequencies();
    embed_into(t, f, out);
    return out;
  }
};

inline std::vector<double> time_embedding(double t, const TimeEmbedding& emb = {}) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("time_embedding: t must be in [0, 1]");
  return emb(t);
}

// ---------------------------------------------------------------------------

struct DenoiserArch {
  std::size_t data_dim = 2;
  std::vector<std::size_t> hidden{128, 128, 128};
  TimeEmbedding embedding{};

  std::size_t input_dim() const { return data_dim + embedding.dim; }

  void validate() const {
    if (data_dim == 0) throw ConfigError("DenoiserArch: data_dim must be >= 1");
    if (embedding.dim == 0 || embedding.dim % 2 != 0)
      throw ConfigError("DenoiserArch: embedding dim must be a positive even number");
    for (auto h : hidden)
      if (h == 0) throw ConfigError("DenoiserArch: hidden widths must be >= 1");
  }
};

// Weights of one model generation. `tensors` alternates W_0, b_0, W_1, b_1, ...
// with biases stored as 1 x out matrices, so the optimizer can treat the whole
// network as a flat list.
struct DenoiserParams {
  DenoiserArch arch;
  std::vector<Matrix> tensors;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;

  std::size_t num_layers() const { return tensors.size() / 2; }
  const Matrix& weight(std::size_t l) const { return tensors[2 * l]; }
  const Matrix& bias(std::size_t l) const { return tensors[2 * l + 1]; }
  Matrix& weight(std::size_t l) { return tensors[2 * l]; }
  Matrix& bias(std::size_t l) { return tensors[2 * l + 1]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& t : tensors) flat.insert(flat.end(), t.data.begin(), t.data.end());
    return flat;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw DimensionError("DenoiserParams::unflatten: length mismatch");
    std::size_t off = 0;
    for (auto& t : tensors) {
      std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.data.begin());
      off += t.size();
    }
  }

  bool operator==(const DenoiserParams& o) const {
    return tensors == o.tensors && feature_mean == o.feature_mean && feature_std == o.feature_std;
  }
};

// Glorot-uniform weights, zero biases. With zero_final_layer the network
// starts out predicting zero noise.
inline DenoiserParams init_denoiser(const DenoiserArch& arch, std::uint64_t seed, bool zero_final_layer = true) {
  arch.validate();
  DenoiserParams p;
  p.arch = arch;
  p.feature_mean.assign(arch.data_dim, 0.0);
  p.feature_std.assign(arch.data_dim, 1.0);
  Rng rng(seed, "init");
  std::vector<std::size_t> widths;
  widths.push_back(arch.input_dim());
  widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
  widths.push_back(arch.data_dim);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    Matrix w(in, out);
    const bool last = l + 2 == widths.size();
    if (!(last && zero_final_layer)) {
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      for (auto& v : w.data) v = rng.uniform(-limit, limit);
    }
    p.tensors.push_back(std::move(w));
    p.tensors.emplace_back(1, out);
  }
  return p;
}

namespace detail {

// Activations kept for the backward pass. inputs[l] is the input of affine
// layer l; pre[l] its output before the activation.
struct DenoiserTrace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
};

inline Matrix denoiser_input(const DenoiserParams& params, const Matrix& noisy, std::span<const double> noise_rates) {
  const auto& arch = params.arch;
  if (noisy.cols != arch.data_dim)
    throw DimensionError("denoiser_forward: sample dimension " + std::to_string(noisy.cols) + " != model dimension " +
                         std::to_string(arch.data_dim));
  if (noise_rates.size() != noisy.rows) throw DimensionError("denoiser_forward: one noise rate per sample required");
  const auto freqs = arch.embedding.frequencies();
  Matrix in(noisy.rows, arch.input_dim());
  for (std::size_t i = 0; i < noisy.rows; ++i) {
    auto row = in.row(i);
    const auto src = noisy.row(i);
    std::copy(src.begin(), src.end(), row.begin());
    const double r = noise_rates[i];
    arch.embedding.embed_into(r * r, freqs, row.subspan(arch.data_dim));
  }
  return in;
}

inline Matrix denoiser_forward_traced(const DenoiserParams& params, const Matrix& noisy,
                                      std::span<const double> noise_rates, DenoiserTrace* trace) {
  Matrix h = denoiser_input(params, noisy, noise_rates);
  const std::size_t layers = params.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = affine_forward(h, params.weight(l), params.bias(l).data);
    const bool last = l + 1 == layers;
    if (trace) trace->inputs.push_back(std::move(h));
    if (last) return z;
    h = silu_forward(z);
    if (trace) trace->pre.push_back(std::move(z));
  }
  return h;
}

}  // namespace detail

// Predicted noise for a batch of noisy samples in the model's normalized space.
inline Matrix denoiser_forward(const DenoiserParams& params, const Matrix& noisy, std::span<const double> noise_rates) {
  return detail::denoiser_forward_traced(params, noisy, noise_rates, nullptr);
}

struct DenoiserLoss {
  double loss = 0.0;
  std::vector<Matrix> grads;  // same layout as DenoiserParams::tensors
};

// MSE between predicted and true noise, with gradients for every tensor.
inline DenoiserLoss denoiser_loss(const DenoiserParams& params, const Matrix& noisy, std::span<const double> noise_rates,
                                  const Matrix& true_noise) {
  detail::DenoiserTrace trace;
  const Matrix pred = detail::denoiser_forward_traced(params, noisy, noise_rates, &trace);
  LossAndGrad lg = mse_loss(pred, true_noise);
  DenoiserLoss out;
  out.loss = lg.loss;
  out.grads.resize(params.tensors.size());
  Matrix upstream = std::move(lg.grad);
  for (std::size_t l = params.num_layers(); l-- > 0;) {
    AffineGrads g = affine_backward(trace.inputs[l], params.weight(l), upstream, l > 0);
    out.grads[2 * l] = std::move(g.grad_w);
    const std::size_t width = g.grad_b.size();
    out.grads[2 * l + 1] = Matrix(1, width, std::move(g.grad_b));
    if (l > 0) upstream = silu_backward(trace.pre[l - 1], g.grad_x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  AdamWConfig optimizer{};
  std::uint64_t seed = 0;
  // Seed for weight initialization; defaults to `seed`.
  std::optional<std::uint64_t> init_seed;
  bool shuffle = true;
  // Standardize features with pool statistics before training.
  bool standardize = true;
  // Cosine-anneal the learning rate from its base value to
  // final_lr_fraction * base over the whole run.
  bool cosine_decay = false;
  double final_lr_fraction = 0.0;

  void validate() const {
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (!(optimizer.learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
    if (!(final_lr_fraction >= 0.0 && final_lr_fraction <= 1.0))
      throw ConfigError("TrainConfig: final_lr_fraction must be in [0, 1]");
  }
};

struct TrainResult {
  DenoiserParams params;
  std::vector<double> loss_history;  // mean batch loss per epoch
};

// Per-feature standardization statistics; a floor keeps constant features
// (e.g. always-dark image corners) from blowing up.
inline void fit_normalization(DenoiserParams& params, const Matrix& data, double std_floor = 1e-3) {
  const std::size_t d = data.cols;
  params.feature_mean.assign(d, 0.0);
  params.feature_std.assign(d, 1.0);
  if (data.rows == 0) return;
  const double n = static_cast<double>(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i)
    for (std::size_t j = 0; j < d; ++j) params.feature_mean[j] += data(i, j);
  for (auto& m : params.feature_mean) m /= n;
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < data.rows; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = data(i, j) - params.feature_mean[j];
      var[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j) params.feature_std[j] = std::max(std::sqrt(var[j] / n), std_floor);
}

inline TrainResult train_denoiser(const Matrix& data, const DenoiserArch& arch, const TrainConfig& cfg,
                                  const DiffusionSchedule& sched,
                                  const DenoiserParams* warm_start = nullptr) {
  cfg.validate();
  sched.validate();
  if (data.rows == 0) throw ConfigError("train_denoiser: empty training pool");
  if (data.cols != arch.data_dim)
    throw DimensionError("train_denoiser: pool dimension " + std::to_string(data.cols) + " != model dimension " +
                         std::to_string(arch.data_dim));

  TrainResult result;
  if (warm_start) {
    if (warm_start->arch.data_dim != arch.data_dim) throw DimensionError("train_denoiser: warm start dimension mismatch");
    result.params = *warm_start;
  } else {
    result.params = init_denoiser(arch, cfg.init_seed.value_or(cfg.seed));
  }
  DenoiserParams& params = result.params;
  if (cfg.epochs == 0) return result;

  if (cfg.standardize) {
    fit_normalization(params, data);
  } else {
    params.feature_mean.assign(data.cols, 0.0);
    params.feature_std.assign(data.cols, 1.0);
  }
  const std::size_t n = data.rows, d = data.cols;
  Matrix normalized(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      normalized(i, j) = (data(i, j) - params.feature_mean[j]) / params.feature_std[j];

  OptimizerState opt(params.tensors, cfg.optimizer);
  Rng rng(cfg.seed, "train");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch * cfg.epochs);
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle)
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, n - start);
      Matrix noisy(b, d), noise(b, d);
      std::vector<double> noise_rates(b);
      for (std::size_t i = 0; i < b; ++i) {
        const auto rates = schedule_rates(sched, rng.uniform());
        noise_rates[i] = rates.noise;
        const auto x0 = normalized.row(order[start + i]);
        for (std::size_t j = 0; j < d; ++j) {
          const double e = rng.normal();
          noise(i, j) = e;
          noisy(i, j) = rates.signal * x0[j] + rates.noise * e;
        }
      }
      if (cfg.cosine_decay) {
        const double progress = static_cast<double>(global_step) / total_steps;
        const double scale = cfg.final_lr_fraction +
                             (1.0 - cfg.final_lr_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
        opt.config.learning_rate = cfg.optimizer.learning_rate * scale;
      }
      ++global_step;
      DenoiserLoss step;
      try {
        step = denoiser_loss(params, noisy, noise_rates, noise);
      } catch (const DomainError& e) {
        // Activations overflowed.
        throw TrainingDiverged("train_denoiser: epoch " + std::to_string(epoch + 1) + ": " + e.what());
      }
      if (!std::isfinite(step.loss))
        throw TrainingDiverged("train_denoiser: non-finite loss at epoch " + std::to_string(epoch + 1));
      optimizer_step(params.tensors, step.grads, opt);
      for (const auto& t : params.tensors)
        if (!all_finite(t.data))
          throw TrainingDiverged("train_denoiser: non-finite weights at epoch " + std::to_string(epoch + 1));
      loss_sum += step.loss;
      ++batches;
    }
    result.loss_history.push_back(loss_sum / static_cast<double>(batches));
  }
  return result;
}

inline TrainResult train_denoiser(const DataPool& pool, const DenoiserArch& arch, const TrainConfig& cfg,
                                  const DiffusionSchedule& sched, const DenoiserParams* warm_start = nullptr) {
  if (pool.empty()) throw ConfigError("train_denoiser: empty training pool");
  return train_denoiser(pool.features(), arch, cfg, sched, warm_start);
}

// ---------------------------------------------------------------------------
// Sampling

struct SampleRequest {
  std::size_t count = 1024;
  std::size_t steps = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (steps < 1) throw ConfigError("SampleRequest: steps must be >= 1");
    if (count < 1) throw ConfigError("SampleRequest: count must be >= 1");
  }
};

// Deterministic DDIM reverse process starting from `noisy` at t = 1.
// `predict(x_t, noise_rates)` returns the predicted noise for each row.
// `observe(step, x0_estimate)`, if given, sees the clean-sample estimate at
// each step. Returns the final clean-sample estimate.
template <class Predictor, class Observer>
Matrix ddim_reverse(Predictor&& predict, const DiffusionSchedule& sched, Matrix noisy, std::size_t steps,
                    Observer&& observe) {
  if (steps < 1) throw ConfigError("ddim_reverse: steps must be >= 1");
  sched.validate();
  const double step_size = 1.0 / static_cast<double>(steps);
  Matrix x0_hat(noisy.rows, noisy.cols);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = 1.0 - static_cast<double>(s) * step_size;
    const auto rates = schedule_rates(sched, t);
    const std::vector<double> noise_rates(noisy.rows, rates.noise);
    const Matrix eps_hat = predict(noisy, std::span<const double>(noise_rates));
    if (!eps_hat.same_shape(noisy)) throw DimensionError("ddim_reverse: predictor returned wrong shape");
    for (std::size_t i = 0; i < noisy.size(); ++i)
      x0_hat.data[i] = (noisy.data[i] - rates.noise * eps_hat.data[i]) / rates.signal;
    observe(s, static_cast<const Matrix&>(x0_hat));
    const double t_next = std::max(0.0, t - step_size);
    const auto next = schedule_rates(sched, t_next);
    for (std::size_t i = 0; i < noisy.size(); ++i)
      noisy.data[i] = next.signal * x0_hat.data[i] + next.noise * eps_hat.data[i];
  }
  return x0_hat;
}

template <class Predictor>
Matrix ddim_reverse(Predictor&& predict, const DiffusionSchedule& sched, Matrix noisy, std::size_t steps) {
  return ddim_reverse(std::forward<Predictor>(predict), sched, std::move(noisy), steps,
                      [](std::size_t, const Matrix&) {});
}

// Draws req.count samples in data space. Rows are processed in fixed-size
// chunks; each row's result does not depend on the chunking.
inline Matrix ddim_sample(const DenoiserParams& params, const DiffusionSchedule& sched, const SampleRequest& req) {
  req.validate();
  const std::size_t d = params.arch.data_dim;
  Rng rng(req.seed, "ddim-noise");
  Matrix start(req.count, d);
  for (auto& v : start.data) v = rng.normal();

  constexpr std::size_t kChunk = 1024;
  Matrix out(req.count, d);
  auto predict = [&params](const Matrix& x, std::span<const double> rates) {
    return denoiser_forward(params, x, rates);
  };
  for (std::size_t begin = 0; begin < req.count; begin += kChunk) {
    Matrix chunk = ddim_reverse(predict, sched, slice_rows(start, begin, begin + kChunk), req.steps);
    for (std::size_t i = 0; i < chunk.rows; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out(begin + i, j) = chunk(i, j) * params.feature_std[j] + params.feature_mean[j];
  }
  return out;
}

}  // namespace degenloop
