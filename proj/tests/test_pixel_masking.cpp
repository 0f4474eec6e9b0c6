#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "geoconsist/pixel_masking.hpp"

using namespace geoconsist;

namespace {

// 1..n in shuffled order on a 10-wide grid.
ScalarGrid shuffled_ranks(int n, std::uint64_t seed) {
  std::vector<double> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 1.0);
  std::mt19937_64 rng(seed);
  std::shuffle(v.begin(), v.end(), rng);
  return ScalarGrid(n / 10, 10, v);
}

ScalarGrid random_grid(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScalarGrid g(h, w);
  for (double& v : g.values()) v = u(rng);
  return g;
}

BinaryGrid bernoulli(int h, int w, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  BinaryGrid m(h, w);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, b(rng));
  return m;
}

bool same(const BinaryGrid& a, const BinaryGrid& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

TEST(NearestRankPercentile, Examples) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(nearest_rank_percentile(v, 90.0), 90.0);
  EXPECT_EQ(nearest_rank_percentile(v, 50.0), 50.0);
  EXPECT_EQ(nearest_rank_percentile(v, 0.5), 1.0);
  EXPECT_EQ(nearest_rank_percentile(v, 99.5), 100.0);
  const std::vector<double> three{3.0, 1.0, 2.0};
  EXPECT_EQ(nearest_rank_percentile(three, 50.0), 2.0);  // rank ceil(1.5) = 2
  EXPECT_THROW(nearest_rank_percentile(std::vector<double>{}, 50.0), Error);
}

TEST(MaskConfig, RejectsOutOfRangePercentiles) {
  for (double q : {0.0, 100.0, -1.0, std::nan("")}) {
    EXPECT_THROW((MaskConfig{q, 90.0}.validate()), Error) << q;
    EXPECT_THROW((MaskConfig{90.0, q}.validate()), Error) << q;
  }
  EXPECT_NO_THROW(MaskConfig{}.validate());
}

TEST(ErrorMask, UniformRanks) {
  const ScalarGrid e = shuffled_ranks(100, 1);
  const BinaryGrid all(10, 10, true);
  const BinaryGrid m90 = error_mask(e, all);
  EXPECT_EQ(m90.count(), 90u);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_EQ(m90[i], e[i] <= 90.0);
  EXPECT_EQ(error_mask(e, all, {50.0, 90.0}).count(), 50u);
}

TEST(ErrorMask, ConstantErrorsKeepAllValid) {
  BinaryGrid valid(6, 7, true);
  valid.set(2, 3, false);
  const BinaryGrid m = error_mask(ScalarGrid(6, 7, 0.25), valid);
  EXPECT_TRUE(same(m, valid));
}

TEST(ErrorMask, InvalidPixelsAreExcludedFromRankAndResult) {
  const ScalarGrid e = shuffled_ranks(100, 2);
  BinaryGrid valid(10, 10, true);
  // Invalidate the 50 largest errors; the percentile is over 1..50 only.
  for (std::size_t i = 0; i < e.size(); ++i)
    if (e[i] > 50.0) valid.set(i, false);
  const BinaryGrid m = error_mask(e, valid);
  EXPECT_EQ(m.count(), 45u);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_EQ(m[i], e[i] <= 45.0);
  try {
    error_mask(e, BinaryGrid(10, 10, false));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::EmptyMask);
  }
}

TEST(ErrorMask, DistinctErrorsKeepNearestRankCount) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const ScalarGrid e = random_grid(23, 31, rng());
    const BinaryGrid valid = bernoulli(23, 31, 0.7, rng);
    const double q = std::uniform_real_distribution<double>(1.0, 99.0)(rng);
    const double n = static_cast<double>(valid.count());
    const double expected = std::ceil(q / 100.0 * n);
    EXPECT_LE(std::abs(static_cast<double>(error_mask(e, valid, {q, 90.0}).count()) - expected), 2.0);
  }
}

TEST(ErrorMask, IdempotentUnderReapplication) {
  const ScalarGrid e = random_grid(20, 20, 4);
  const BinaryGrid all(20, 20, true);
  const BinaryGrid first = error_mask(e, all);
  // The kept set's own 100th percentile is the previous threshold.
  EXPECT_TRUE(same(error_mask(e, first, {99.999, 90.0}), first));
  const BinaryGrid second = error_mask(e, first);
  for (std::size_t i = 0; i < e.size(); ++i)
    if (second[i]) EXPECT_TRUE(first[i]);
}

TEST(ErrorMask, MonotoneInPercentile) {
  const ScalarGrid e = random_grid(16, 16, 5);
  const BinaryGrid all(16, 16, true);
  BinaryGrid prev = error_mask(e, all, {1.0, 90.0});
  for (double q = 5.0; q < 100.0; q += 4.0) {
    const BinaryGrid cur = error_mask(e, all, {q, 90.0});
    for (std::size_t i = 0; i < e.size(); ++i)
      if (prev[i]) EXPECT_TRUE(cur[i]) << q;
    prev = cur;
  }
}

TEST(GradientMagnitude, ForwardDifferencesAveragedOverChannels) {
  ScalarGrid a(3, 3, 0.0), b(3, 3, 0.0);
  a(0, 0) = 0.0;
  a(0, 1) = 3.0;
  a(1, 0) = 4.0;
  b(0, 1) = 1.0;
  const ScalarGrid g = gradient_magnitude(Image{a, b});
  // Channel a: (3, 4) -> 5; channel b: (1, 0) -> 1.
  EXPECT_DOUBLE_EQ(g(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(g(2, 2), 0.0);
}

TEST(GradientMask, ConstantAndRampImagesAreEmpty) {
  const BinaryGrid all(10, 10, true);
  EXPECT_EQ(gradient_mask(Image{ScalarGrid(10, 10, 0.4)}, all).count(), 0u);
  // Forward differences vanish on the last row and column, so only the
  // interior counts as valid; every interior gradient then ties.
  ScalarGrid ramp(10, 10);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) ramp(r, c) = static_cast<double>(c + r);
  BinaryGrid interior(10, 10, false);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c) interior.set(r, c, true);
  EXPECT_EQ(gradient_mask(Image{ramp}, interior).count(), 0u);
}

TEST(GradientMask, StepEdgeKeepsExactlyTheEdgePixels) {
  ScalarGrid step(10, 10, 0.0);
  for (int r = 0; r < 10; ++r)
    for (int c = 5; c < 10; ++c) step(r, c) = 1.0;
  const BinaryGrid m = gradient_mask(Image{step}, BinaryGrid(10, 10, true));
  EXPECT_EQ(m.count(), 10u);
  for (int r = 0; r < 10; ++r) EXPECT_TRUE(m(r, 4));
}

TEST(CompositeMask, Examples) {
  const BinaryGrid ones(4, 5, true), zeros(4, 5, false);
  EXPECT_TRUE(same(composite_mask(ones, ones), ones));
  BinaryGrid a(4, 5), b(4, 5);
  for (std::size_t i = 0; i < a.size(); ++i) (i % 2 ? a : b).set(i, true);
  EXPECT_TRUE(same(composite_mask(a, b), zeros));
  EXPECT_THROW(composite_mask(ones, BinaryGrid(5, 4, true)), Error);
}

TEST(CompositeMask, CommutativeLogicalAnd) {
  std::mt19937_64 rng(6);
  const BinaryGrid a = bernoulli(30, 40, 0.6, rng), b = bernoulli(30, 40, 0.3, rng);
  const BinaryGrid ab = composite_mask(a, b);
  EXPECT_TRUE(same(ab, composite_mask(b, a)));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(ab[i], a[i] && b[i]);
}

TEST(CompositeMask, IndependentMasksKeepNinePercent) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const BinaryGrid e = bernoulli(128, 416, 0.9, rng), g = bernoulli(128, 416, 0.1, rng);
    const double frac = static_cast<double>(composite_mask(e, g).count()) / (128.0 * 416.0);
    EXPECT_GE(frac, 0.05);
    EXPECT_LE(frac, 0.14);
  }
}
