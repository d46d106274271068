#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "degenloop/numcore.hpp"
#include "degenloop/rng.hpp"
#include "test_util.hpp"

namespace dl = degenloop;
using dl::Matrix;
using dl::testing::naive_affine;
using dl::testing::random_matrix;
using dl::testing::random_vector;

TEST(Affine, IdentityWeights) {
  const Matrix x = Matrix::from_rows({{1, 2}});
  const Matrix w = Matrix::from_rows({{1, 0}, {0, 1}});
  const std::vector<double> b{0, 0};
  EXPECT_EQ(dl::affine_forward(x, w, b), Matrix::from_rows({{1, 2}}));
}

TEST(Affine, ZeroInputPassesBias) {
  dl::Rng rng(3, "affine");
  const Matrix x(1, 2);
  const Matrix w = random_matrix(rng, 2, 2);
  const std::vector<double> b{3, 4};
  EXPECT_EQ(dl::affine_forward(x, w, b), Matrix::from_rows({{3, 4}}));
}

TEST(Affine, MatchesNaiveTripleLoopExactly) {
  dl::Rng rng(11, "affine-oracle");
  const std::vector<std::array<std::size_t, 3>> shapes{{3, 4, 2}, {1, 1, 1}, {7, 18, 5}, {64, 18, 128}, {5, 128, 2}};
  for (const auto& [n, in, out] : shapes) {
    const Matrix x = random_matrix(rng, n, in);
    const Matrix w = random_matrix(rng, in, out);
    const auto b = random_vector(rng, out);
    EXPECT_EQ(dl::affine_forward(x, w, b), naive_affine(x, w, b)) << n << "x" << in << "x" << out;
  }
}

TEST(Affine, ShapeMismatchThrows) {
  EXPECT_THROW(dl::affine_forward(Matrix(2, 3), Matrix(2, 2), std::vector<double>(2)), dl::DimensionError);
  EXPECT_THROW(dl::affine_forward(Matrix(2, 2), Matrix(2, 2), std::vector<double>(3)), dl::DimensionError);
  EXPECT_THROW(dl::affine_backward(Matrix(2, 2), Matrix(2, 3), Matrix(2, 2)), dl::DimensionError);
}

TEST(AffineBackward, ZeroUpstreamGivesZeroGradients) {
  dl::Rng rng(5, "affine-bw");
  const Matrix x = random_matrix(rng, 3, 4), w = random_matrix(rng, 4, 2);
  const auto g = dl::affine_backward(x, w, Matrix(3, 2));
  for (double v : g.grad_x.data) EXPECT_EQ(v, 0.0);
  for (double v : g.grad_w.data) EXPECT_EQ(v, 0.0);
  for (double v : g.grad_b) EXPECT_EQ(v, 0.0);
}

TEST(AffineBackward, ScalarChainRule) {
  const auto g = dl::affine_backward(Matrix::from_rows({{2}}), Matrix::from_rows({{3}}), Matrix::from_rows({{1}}));
  EXPECT_EQ(g.grad_x, Matrix::from_rows({{3}}));
  EXPECT_EQ(g.grad_w, Matrix::from_rows({{2}}));
  EXPECT_EQ(g.grad_b, std::vector<double>{1});
}

// L = sum(upstream .* affine(x, W, b)) as a function of the flattened
// (x, W, b); its gradient is exactly what affine_backward returns.
TEST(AffineBackward, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    dl::Rng rng(seed, "affine-fd");
    const std::size_t n = 3, in = 4, out = 2;
    const Matrix x = random_matrix(rng, n, in), w = random_matrix(rng, in, out), up = random_matrix(rng, n, out);
    const auto b = random_vector(rng, out);
    std::vector<double> flat;
    flat.insert(flat.end(), x.data.begin(), x.data.end());
    flat.insert(flat.end(), w.data.begin(), w.data.end());
    flat.insert(flat.end(), b.begin(), b.end());
    auto fn = [&](std::span<const double> p) {
      Matrix xx(n, in, {p.begin(), p.begin() + n * in});
      Matrix ww(in, out, {p.begin() + n * in, p.begin() + n * in + in * out});
      std::vector<double> bb(p.begin() + n * in + in * out, p.end());
      const Matrix y = dl::affine_forward(xx, ww, bb);
      double value = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) value += up.data[i] * y.data[i];
      const auto g = dl::affine_backward(xx, ww, up);
      std::vector<double> grad;
      grad.insert(grad.end(), g.grad_x.data.begin(), g.grad_x.data.end());
      grad.insert(grad.end(), g.grad_w.data.begin(), g.grad_w.data.end());
      grad.insert(grad.end(), g.grad_b.begin(), g.grad_b.end());
      return dl::ValueAndGrad{value, grad};
    };
    EXPECT_LT(dl::finite_diff_check(fn, flat, 1e-5), 1e-6) << "seed " << seed;
  }
}

TEST(Silu, KnownValues) {
  EXPECT_EQ(dl::silu(0.0), 0.0);
  // 10 * sigmoid(10) = 10 / (1 + e^-10)
  EXPECT_NEAR(dl::silu(10.0), 9.99954602131, 1e-10);
  EXPECT_NEAR(dl::silu(10.0), 9.99954, 1e-5);
  EXPECT_EQ(dl::silu_derivative(0.0), 0.5);
  EXPECT_NEAR(dl::silu(-40.0), 0.0, 1e-15);
}

TEST(Silu, RejectsNonFinite) {
  Matrix x(1, 2);
  x(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(dl::silu_forward(x), dl::DomainError);
  x(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(dl::silu_backward(x, Matrix(1, 2)), dl::DomainError);
}

TEST(Silu, BackwardMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    dl::Rng rng(seed, "silu-fd");
    const Matrix up = random_matrix(rng, 4, 3);
    const Matrix x0 = random_matrix(rng, 4, 3, 3.0);
    auto fn = [&](std::span<const double> p) {
      Matrix x(4, 3, {p.begin(), p.end()});
      const Matrix y = dl::silu_forward(x);
      double v = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) v += up.data[i] * y.data[i];
      return dl::ValueAndGrad{v, dl::silu_backward(x, up).data};
    };
    EXPECT_LT(dl::finite_diff_check(fn, x0.data, 1e-5), 1e-4) << "seed " << seed;
  }
}

TEST(Mse, EqualInputs) {
  const auto r = dl::mse_loss(Matrix::from_rows({{1, 2}}), Matrix::from_rows({{1, 2}}));
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.grad, Matrix(1, 2));
}

TEST(Mse, ScalarCase) {
  const auto r = dl::mse_loss(Matrix::from_rows({{1}}), Matrix::from_rows({{0}}));
  EXPECT_EQ(r.loss, 1.0);
  EXPECT_EQ(r.grad, Matrix::from_rows({{2}}));
}

TEST(Mse, ShapeMismatch) { EXPECT_THROW(dl::mse_loss(Matrix(1, 2), Matrix(2, 1)), dl::DimensionError); }

TEST(Mse, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    dl::Rng rng(seed, "mse-fd");
    const Matrix target = random_matrix(rng, 5, 3);
    const Matrix pred = random_matrix(rng, 5, 3);
    auto fn = [&](std::span<const double> p) {
      const auto r = dl::mse_loss(Matrix(5, 3, {p.begin(), p.end()}), target);
      return dl::ValueAndGrad{r.loss, r.grad.data};
    };
    EXPECT_LT(dl::finite_diff_check(fn, pred.data, 1e-5), 1e-6);
  }
}

TEST(OptimizerStep, ZeroGradientNoDecayLeavesParams) {
  dl::Rng rng(1, "opt");
  std::vector<Matrix> params{random_matrix(rng, 3, 2), random_matrix(rng, 1, 2)};
  const auto before = params;
  dl::OptimizerState st(params, dl::AdamWConfig{.weight_decay = 0.0});
  dl::optimizer_step(params, {Matrix(3, 2), Matrix(1, 2)}, st);
  EXPECT_EQ(params, before);
  EXPECT_EQ(st.step, 1u);
}

TEST(OptimizerStep, FirstStepIsLearningRate) {
  // m_hat = g = 1, v_hat = g^2 = 1 after bias correction, so the step is
  // lr * 1 / (1 + eps).
  std::vector<Matrix> params{Matrix::from_rows({{0.5}})};
  dl::OptimizerState st(params, dl::AdamWConfig{.learning_rate = 0.001, .weight_decay = 0.0});
  dl::optimizer_step(params, {Matrix::from_rows({{1.0}})}, st);
  EXPECT_NEAR(0.5 - params[0](0, 0), 0.001, 1e-10);
  EXPECT_NEAR(0.5 - params[0](0, 0), 0.001 / (1.0 + 1e-8), 1e-15);
}

TEST(OptimizerStep, DecoupledWeightDecay) {
  std::vector<Matrix> params{Matrix::from_rows({{2.0}})};
  dl::OptimizerState st(params, dl::AdamWConfig{.learning_rate = 0.01, .weight_decay = 0.1});
  dl::optimizer_step(params, {Matrix::from_rows({{0.0}})}, st);
  EXPECT_NEAR(params[0](0, 0), 2.0 - 0.01 * 0.1 * 2.0, 1e-15);
}

TEST(OptimizerStep, ReplayIsBitIdentical) {
  dl::Rng rng(2, "opt-replay");
  std::vector<Matrix> p1{random_matrix(rng, 4, 4)};
  const std::vector<Matrix> g{random_matrix(rng, 4, 4)};
  auto p2 = p1;
  dl::OptimizerState s1(p1, {}), s2(p2, {});
  for (int i = 0; i < 3; ++i) {
    dl::optimizer_step(p1, g, s1);
    dl::optimizer_step(p2, g, s2);
  }
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(s1.first_moment, s2.first_moment);
  EXPECT_EQ(s1.second_moment, s2.second_moment);
  EXPECT_EQ(s1.step, 3u);
}

TEST(OptimizerStep, NonFiniteGradientDiverges) {
  std::vector<Matrix> params{Matrix(1, 1)};
  dl::OptimizerState st(params, {});
  EXPECT_THROW(dl::optimizer_step(params, {Matrix::from_rows({{std::nan("")}})}, st), dl::TrainingDiverged);
  EXPECT_EQ(st.step, 0u);
}

TEST(OptimizerStep, RejectsBadLearningRateAndShapes) {
  std::vector<Matrix> params{Matrix(1, 1)};
  dl::OptimizerState st(params, dl::AdamWConfig{.learning_rate = 0.0});
  EXPECT_THROW(dl::optimizer_step(params, {Matrix(1, 1)}, st), dl::ConfigError);
  dl::OptimizerState ok(params, {});
  EXPECT_THROW(dl::optimizer_step(params, {Matrix(2, 1)}, ok), dl::DimensionError);
}

TEST(FiniteDiffCheck, Quadratic) {
  auto fn = [](std::span<const double> p) { return dl::ValueAndGrad{p[0] * p[0], {2.0 * p[0]}}; };
  EXPECT_LT(dl::finite_diff_check(fn, {3.0}, 1e-5), 1e-9);
}

TEST(FiniteDiffCheck, ConstantFunction) {
  auto fn = [](std::span<const double>) { return dl::ValueAndGrad{7.0, {0.0, 0.0}}; };
  EXPECT_EQ(dl::finite_diff_check(fn, {1.0, -2.0}, 1e-5), 0.0);
}

TEST(FiniteDiffCheck, DetectsWrongGradient) {
  auto fn = [](std::span<const double> p) { return dl::ValueAndGrad{p[0] * p[0], {3.0 * p[0]}}; };
  EXPECT_GT(dl::finite_diff_check(fn, {3.0}, 1e-5), 0.1);
}

TEST(Rng, SameSeedAndLabelReproduce) {
  dl::Rng a(42, "stream"), b(42, "stream");
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DifferentLabelsDiffer) {
  dl::Rng a(42, "train-g1"), b(42, "eval-g1");
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u64() == b.next_u64();
  EXPECT_EQ(equal, 0);
}

TEST(Rng, DistributionsLookRight) {
  dl::Rng rng(7, "moments");
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) counts[rng.below(5)]++;
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Rng, DerivedSeedsAreDistinct) {
  EXPECT_NE(dl::derive_seed(1, "dataset"), dl::derive_seed(1, "holdout"));
  EXPECT_NE(dl::derive_seed(1, "dataset"), dl::derive_seed(2, "dataset"));
  EXPECT_EQ(dl::derive_seed(9, "x"), dl::derive_seed(9, "x"));
}
