#pragma once

// Dense 64-bit kernel for the denoiser: row-major matrices, affine and SiLU
// layers with hand-written backward passes, mean-squared error, AdamW, and a
// central-difference gradient checker.
//
// Summation order is fixed everywhere (ascending index), so every routine
// is bit-reproducible for identical inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "degenloop/errors.hpp"

namespace degenloop {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw DimensionError("Matrix: data length does not match " + detail::shape_str(r, c));
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows_in) {
    Matrix m(rows_in.size(), rows_in.empty() ? 0 : rows_in.front().size());
    for (std::size_t i = 0; i < m.rows; ++i) {
      if (rows_in[i].size() != m.cols) throw DimensionError("Matrix::from_rows: ragged rows");
      std::copy(rows_in[i].begin(), rows_in[i].end(), m.row(i).begin());
    }
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Matrix&) const = default;
};

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Rows [begin, end) of m.
inline Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end) {
  end = std::min(end, m.rows);
  Matrix out(end - begin, m.cols);
  std::copy(m.data.begin() + begin * m.cols, m.data.begin() + end * m.cols, out.data.begin());
  return out;
}

// ---------------------------------------------------------------------------
// Affine layer: out = x W + b

inline Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b) {
  if (x.cols != w.rows || b.size() != w.cols)
    throw DimensionError("affine_forward: x " + detail::shape_str(x.rows, x.cols) + ", W " +
                         detail::shape_str(w.rows, w.cols) + ", b " + std::to_string(b.size()));
  const std::size_t n = x.rows, in = w.rows, out = w.cols;
  Matrix y(n, out);
  for (std::size_t i = 0; i < n; ++i) {
    double* yi = y.data.data() + i * out;
    const double* xi = x.data.data() + i * in;
    // k-outer keeps the per-entry accumulation order k = 0..in-1 while the
    // inner loop runs contiguously.
    for (std::size_t k = 0; k < in; ++k) {
      const double xik = xi[k];
      const double* wk = w.data.data() + k * out;
      for (std::size_t j = 0; j < out; ++j) yi[j] += xik * wk[j];
    }
    for (std::size_t j = 0; j < out; ++j) yi[j] += b[j];
  }
  return y;
}

struct AffineGrads {
  Matrix grad_x;
  Matrix grad_w;
  std::vector<double> grad_b;
};

// want_grad_x=false skips grad_x (the first layer never needs it).
inline AffineGrads affine_backward(const Matrix& x, const Matrix& w, const Matrix& upstream,
                                   bool want_grad_x = true) {
  if (x.cols != w.rows || upstream.rows != x.rows || upstream.cols != w.cols)
    throw DimensionError("affine_backward: x " + detail::shape_str(x.rows, x.cols) + ", W " +
                         detail::shape_str(w.rows, w.cols) + ", upstream " +
                         detail::shape_str(upstream.rows, upstream.cols));
  const std::size_t n = x.rows, in = w.rows, out = w.cols;
  AffineGrads g{Matrix(want_grad_x ? n : 0, want_grad_x ? in : 0), Matrix(in, out),
                std::vector<double>(out, 0.0)};

  for (std::size_t i = 0; i < n; ++i) {
    const double* ui = upstream.data.data() + i * out;
    const double* xi = x.data.data() + i * in;
    for (std::size_t k = 0; k < in; ++k) {
      const double xik = xi[k];
      double* gk = g.grad_w.data.data() + k * out;
      for (std::size_t j = 0; j < out; ++j) gk[j] += xik * ui[j];
    }
    for (std::size_t j = 0; j < out; ++j) g.grad_b[j] += ui[j];
  }

  if (want_grad_x) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* ui = upstream.data.data() + i * out;
      for (std::size_t k = 0; k < in; ++k) {
        const double* wk = w.data.data() + k * out;
        double acc = 0.0;
        for (std::size_t j = 0; j < out; ++j) acc += ui[j] * wk[j];
        g.grad_x(i, k) = acc;
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// SiLU: y = x * sigmoid(x)

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double silu(double x) { return x * sigmoid(x); }

inline double silu_derivative(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

inline Matrix silu_forward(const Matrix& x) {
  if (!all_finite(x.data)) throw DomainError("silu_forward: non-finite input");
  Matrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = silu(x.data[i]);
  return y;
}

inline Matrix silu_backward(const Matrix& x, const Matrix& upstream) {
  if (!x.same_shape(upstream)) throw DimensionError("silu_backward: shape mismatch");
  if (!all_finite(x.data)) throw DomainError("silu_backward: non-finite input");
  Matrix g(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) g.data[i] = silu_derivative(x.data[i]) * upstream.data[i];
  return g;
}

// ---------------------------------------------------------------------------
// Mean squared error over all entries.

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

inline LossAndGrad mse_loss(const Matrix& pred, const Matrix& target) {
  if (!pred.same_shape(target))
    throw DimensionError("mse_loss: pred " + detail::shape_str(pred.rows, pred.cols) + " vs target " +
                         detail::shape_str(target.rows, target.cols));
  LossAndGrad r{0.0, Matrix(pred.rows, pred.cols)};
  const double n = static_cast<double>(pred.size());
  if (pred.size() == 0) return r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    r.loss += d * d;
    r.grad.data[i] = 2.0 * d / n;
  }
  r.loss /= n;
  return r;
}

// ---------------------------------------------------------------------------
// AdamW (decoupled weight decay, bias-corrected moments).

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

struct OptimizerState {
  AdamWConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;

  OptimizerState() = default;
  OptimizerState(const std::vector<Matrix>& params, AdamWConfig cfg) : config(cfg) {
    for (const auto& p : params) {
      first_moment.emplace_back(p.rows, p.cols);
      second_moment.emplace_back(p.rows, p.cols);
    }
  }
};

inline void optimizer_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
                           OptimizerState& state) {
  const AdamWConfig& c = state.config;
  if (!(c.learning_rate > 0.0)) throw ConfigError("optimizer_step: learning rate must be > 0");
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw DimensionError("optimizer_step: parameter/gradient/state count mismatch");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].same_shape(grads[p]) || !params[p].same_shape(state.first_moment[p]))
      throw DimensionError("optimizer_step: shape mismatch for parameter " + std::to_string(p));
    if (!all_finite(grads[p].data))
      throw TrainingDiverged("optimizer_step: non-finite gradient for parameter " + std::to_string(p));
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params[p].data;
    const auto& g = grads[p].data;
    auto& m = state.first_moment[p].data;
    auto& v = state.second_moment[p].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= c.learning_rate * (m_hat / (std::sqrt(v_hat) + c.epsilon) + c.weight_decay * w[i]);
    }
  }
}

// ---------------------------------------------------------------------------
// Central-difference gradient check.

struct ValueAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// Compares `analytic` against central differences of `value(params)`.
// Returns max_i |analytic_i - fd_i| / max(1, |analytic_i|).
template <class Value>
double finite_diff_check(Value&& value, std::span<const double> analytic, std::vector<double> params, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff_check: step must be > 0");
  if (analytic.size() != params.size()) throw DimensionError("finite_diff_check: gradient length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + h;
    const double fp = value(std::span<const double>(params));
    params[i] = orig - h;
    const double fm = value(std::span<const double>(params));
    params[i] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

// Same, with `fn(params)` returning both the objective and its gradient.
template <class Fn>
double finite_diff_check(Fn&& fn, std::vector<double> params, double h) {
  const ValueAndGrad base = fn(std::span<const double>(params));
  auto value = [&fn](std::span<const double> p) { return fn(p).value; };
  return finite_diff_check(value, base.grad, std::move(params), h);
}

}  // namespace degenloop
