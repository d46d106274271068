#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "degenloop/datapool.hpp"
#include "degenloop/datasets.hpp"
#include "test_util.hpp"

namespace dl = degenloop;
using dl::Matrix;

namespace {

dl::DataPool real_pool(std::size_t n, std::size_t dim = 2, std::uint64_t seed = 0) {
  dl::Rng rng(seed, "pool");
  return dl::DataPool::from_real(dl::testing::random_matrix(rng, n, dim));
}

Matrix synthetic(std::size_t n, std::size_t dim, double value) { return Matrix(n, dim, value); }

}  // namespace

TEST(PlanInjection, PaperRatios) {
  EXPECT_EQ(dl::plan_injection(1024, 1.0), 1024u);
  EXPECT_EQ(dl::plan_injection(1024, 0.5), 512u);
  EXPECT_EQ(dl::plan_injection(1024, 0.0), 0u);
  EXPECT_EQ(dl::plan_injection(1024, 2.0), 2048u);
  // newest-generation share of the next pool at alpha = 0.5
  EXPECT_DOUBLE_EQ(512.0 / (1024.0 + 512.0), 1.0 / 3.0);
}

TEST(PlanInjection, RoundsHalfUp) {
  EXPECT_EQ(dl::plan_injection(3, 0.5), 2u);  // 1.5 -> 2
  EXPECT_EQ(dl::plan_injection(5, 0.1), 1u);  // 0.5 -> 1
  EXPECT_EQ(dl::plan_injection(7, 0.2), 1u);  // 1.4 -> 1
}

TEST(PlanInjection, Errors) {
  EXPECT_THROW(dl::plan_injection(10, -0.1), dl::ConfigError);
  EXPECT_THROW(dl::plan_injection(0, 1.0), dl::ConfigError);
}

TEST(Inject, ZeroSamplesLeavesPool) {
  const auto pool = real_pool(10);
  EXPECT_EQ(dl::inject(pool, Matrix(0, 2), 1), pool);
}

TEST(Inject, GrowsAndTracksProvenance) {
  const auto pool = real_pool(1024);
  const auto next = dl::inject(pool, synthetic(1024, 2, 0.25), 1);
  EXPECT_EQ(next.size(), 2048u);
  EXPECT_EQ(next.real_fraction(), 0.5);
  EXPECT_EQ(next.generation_counts().at(0), 1024u);
  EXPECT_EQ(next.generation_counts().at(1), 1024u);
  EXPECT_EQ(next.samples().back().kind, dl::SampleKind::synthetic);
  EXPECT_EQ(next.samples().back().generation, 1);
  EXPECT_EQ(next.samples().front().kind, dl::SampleKind::real);
}

TEST(Inject, Errors) {
  const auto pool = real_pool(4);
  EXPECT_THROW(dl::inject(pool, synthetic(2, 3, 0.0), 1), dl::DimensionError);
  EXPECT_THROW(dl::inject(pool, synthetic(2, 2, 0.0), 2), dl::ConfigError);
  const auto g1 = dl::inject(pool, synthetic(2, 2, 0.0), 1);
  EXPECT_THROW(dl::inject(g1, synthetic(2, 2, 0.0), 1), dl::ConfigError);
  EXPECT_THROW(dl::inject(g1, synthetic(2, 2, 0.0), 0), dl::ConfigError);
  EXPECT_THROW(dl::inject(g1, synthetic(2, 2, std::nan("")), 2), dl::DomainError);
}

TEST(Inject, GeometricGrowthAtAlphaOne) {
  auto pool = real_pool(1024);
  std::vector<std::size_t> sizes;
  for (int g = 1; g <= 3; ++g) {
    pool = dl::inject(pool, synthetic(dl::plan_injection(pool.size(), 1.0), 2, g), g);
    sizes.push_back(pool.size());
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{2048, 4096, 8192}));
}

// Evolving a pool: append-only, size recurrence, and the closed-form real
// fraction whenever alpha * size is integral.
TEST(Inject, EvolutionInvariants) {
  for (double alpha : {0.5, 1.0, 2.0, 0.25}) {
    auto pool = real_pool(1024, 2, 3);
    for (int g = 1; g <= 4; ++g) {
      EXPECT_DOUBLE_EQ(pool.real_fraction(), dl::real_fraction_closed_form(alpha, g)) << alpha << " g" << g;
      if (g == 4) break;
      const auto before = pool;
      const std::size_t k = dl::plan_injection(pool.size(), alpha);
      pool = dl::inject(pool, synthetic(k, 2, -g), g);
      ASSERT_EQ(pool.size(), before.size() + k);
      for (std::size_t i = 0; i < before.size(); ++i) ASSERT_EQ(pool.samples()[i], before.samples()[i]);
      std::size_t total = 0;
      for (const auto& [gen, c] : pool.generation_counts()) total += c;
      EXPECT_EQ(total, pool.size());
    }
  }
}

TEST(RealFraction, ClosedForm) {
  EXPECT_EQ(dl::real_fraction_closed_form(0.7, 1), 1.0);
  EXPECT_EQ(dl::real_fraction_closed_form(1.0, 4), 0.125);
  EXPECT_DOUBLE_EQ(dl::real_fraction_closed_form(0.5, 2), 2.0 / 3.0);
  EXPECT_THROW(dl::real_fraction_closed_form(1.0, 0), dl::DomainError);
}

TEST(InjectSkewed, AcceptAllMatchesInject) {
  const auto pool = real_pool(16);
  dl::Rng rng(1, "cand");
  const Matrix cand = dl::testing::random_matrix(rng, 16, 2);
  auto draw = [&](std::size_t n, std::size_t) { return dl::slice_rows(cand, 0, n); };
  const auto r = dl::inject_skewed(pool, draw, [](std::span<const double>) { return true; }, 1, 16);
  EXPECT_EQ(r.pool, dl::inject(pool, cand, 1));
  EXPECT_EQ(r.achieved, 16u);
  EXPECT_FALSE(r.warning);
}

TEST(InjectSkewed, AcceptNothingWarns) {
  const auto pool = real_pool(16);
  auto draw = [](std::size_t n, std::size_t) { return Matrix(n, 2, 1.0); };
  const auto r = dl::inject_skewed(pool, draw, [](std::span<const double>) { return false; }, 1, 16, 3);
  EXPECT_EQ(r.pool, pool);
  EXPECT_EQ(r.achieved, 0u);
  ASSERT_TRUE(r.warning);
  EXPECT_NE(r.warning->find("0 of 16"), std::string::npos);
}

TEST(InjectSkewed, RingModeZeroOnly) {
  dl::DatasetSpec spec;
  spec.seed = 4;
  const auto pool = dl::generate_gaussian_ring(spec);
  const dl::RingParams ring = spec.ring;
  const std::size_t target = dl::plan_injection(pool.size(), 1.0);
  auto draw = [&](std::size_t n, std::size_t round) {
    dl::DatasetSpec s = spec;
    s.size = std::max<std::size_t>(n, 2);
    s.seed = 100 + round;
    return dl::slice_rows(dl::gaussian_ring_features(s), 0, n);
  };
  auto keep = [&](std::span<const double> x) { return dl::nearest_ring_mode(ring, x) == 0; };
  const auto r = dl::inject_skewed(pool, draw, keep, 1, target, 8);
  EXPECT_EQ(r.achieved, target);
  EXPECT_FALSE(r.warning);
  EXPECT_GT(r.candidates_drawn, target);
  std::size_t checked = 0;
  for (const auto& s : r.pool.samples()) {
    if (s.generation != 1) continue;
    ++checked;
    // Voronoi cell of mode 0 (centred on the positive x axis): angle within +-pi/8.
    EXPECT_LE(std::abs(std::atan2(s.features[1], s.features[0])), std::numbers::pi / 8 + 1e-12);
  }
  EXPECT_EQ(checked, target);
}

TEST(PoolStats, FreshAndInjected) {
  EXPECT_EQ(dl::pool_stats(dl::DataPool(3)).size, 0u);
  EXPECT_TRUE(dl::pool_stats(dl::DataPool(3)).generations.empty());
  const auto pool = real_pool(8);
  EXPECT_EQ(dl::pool_stats(pool).real_fraction, 1.0);
  const auto next = dl::inject(dl::inject(pool, synthetic(8, 2, 2.0), 1), synthetic(16, 2, -1.0), 2);
  const auto st = dl::pool_stats(next);
  EXPECT_EQ(st.size, 32u);
  EXPECT_DOUBLE_EQ(st.real_fraction, dl::real_fraction_closed_form(1.0, 3));
  ASSERT_EQ(st.generations.size(), 3u);
  EXPECT_EQ(st.generations[1].count, 8u);
  EXPECT_EQ(st.generations[1].feature_mean, (std::vector<double>{2.0, 2.0}));
  EXPECT_EQ(st.generations[2].feature_mean, (std::vector<double>{-1.0, -1.0}));
}
