#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include "geoconsist/trajectory_eval.hpp"

using namespace geoconsist;

namespace {

Trajectory circle(int frames, double radius = 10.0) {
  Trajectory t;
  for (int i = 0; i < frames; ++i) {
    const double a = 0.15 * i;
    const Mat3 r = Eigen::AngleAxisd(-a, Vec3::UnitY()).toRotationMatrix();
    t.poses.push_back(Pose::from_rt(r, Vec3{radius * std::cos(a) - radius, 0.3 * std::sin(2 * a), radius * std::sin(a)}));
  }
  return t;
}

std::vector<Snippet> slices(const Trajectory& t, std::size_t length) {
  std::vector<Snippet> out;
  for (std::size_t i = 0; i + length <= t.poses.size(); ++i) out.push_back(slice_snippet(t, i, length));
  return out;
}

Snippet scaled(Snippet s, double k) {
  for (Pose& p : s.poses) p.translation *= k;
  return s;
}

Trajectory transformed(const Trajectory& t, const Similarity& s) {
  Trajectory out;
  for (const Pose& p : t.poses) out.poses.push_back(Pose{s.rotation * p.rotation, s.apply(p.translation)});
  return out;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
}

double rotation_angle(const Mat3& r) { return Eigen::AngleAxisd(r).angle(); }

double residual(const Similarity& s, std::span<const Vec3> src, std::span<const Vec3> dst) {
  double e = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) e += (s.apply(src[i]) - dst[i]).squaredNorm();
  return e;
}

}  // namespace

TEST(SliceSnippet, FirstPoseIsIdentityAndRelativeMotionIsKept) {
  const Trajectory t = circle(8);
  const Snippet s = slice_snippet(t, 3, 3);
  ASSERT_EQ(s.poses.size(), 3u);
  EXPECT_NO_THROW(s.validate());
  const Pose expected = compose(invert(t.poses[3]), t.poses[5]);
  EXPECT_LT((s.poses[2].rotation - expected.rotation).norm() + (s.poses[2].translation - expected.translation).norm(), 1e-12);
  EXPECT_THROW(slice_snippet(t, 6, 3), Error);
}

TEST(ChainSnippets, SingleSnippetIsItself) {
  const Snippet s = slice_snippet(circle(5), 1, 3);
  const std::vector<Snippet> one{s};
  const Trajectory t = chain_snippets(one);
  ASSERT_EQ(t.poses.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LT((t.poses[i].translation - s.poses[i].translation).norm(), 1e-12);
    EXPECT_LT((t.poses[i].rotation - s.poses[i].rotation).norm(), 1e-12);
  }
}

TEST(ChainSnippets, ConstantVelocityGivesUniformLine) {
  Snippet s;
  for (int i = 0; i < 3; ++i) s.poses.push_back(Pose{Mat3::Identity(), Vec3{0, 0, 1.5 * i}});
  const std::vector<Snippet> snippets(6, s);
  const Trajectory t = chain_snippets(snippets);
  ASSERT_EQ(t.poses.size(), 8u);
  for (std::size_t i = 0; i < t.poses.size(); ++i) {
    EXPECT_LT((t.poses[i].translation - Vec3{0, 0, 1.5 * static_cast<double>(i)}).norm(), 1e-12);
    EXPECT_LT((t.poses[i].rotation - Mat3::Identity()).norm(), 1e-12);
  }
}

TEST(ChainSnippets, SlicedCircleReassembles) {
  const Trajectory gt = circle(30);
  const std::vector<Snippet> s = slices(gt, 3);
  EXPECT_LT(median_ape(chain_snippets(s), gt), 1e-6);
  // Independent per-snippet scales are absorbed by the overlap rescaling.
  std::vector<Snippet> rescaled;
  for (std::size_t i = 0; i < s.size(); ++i) rescaled.push_back(scaled(s[i], 0.5 + 0.1 * static_cast<double>(i % 7)));
  EXPECT_LT(median_ape(chain_snippets(rescaled), gt), 1e-6);
}

TEST(ChainSnippets, ChainingHalvesThenConcatenatingMatches) {
  const Trajectory gt = circle(14);
  const std::vector<Snippet> s = slices(gt, 3);
  const std::size_t k = 5;
  const Trajectory all = chain_snippets(s);
  const Trajectory head = chain_snippets(std::span<const Snippet>(s).first(k));
  const Trajectory tail = chain_snippets(std::span<const Snippet>(s).subspan(k));
  // Tail frame j is frame k + j, expressed relative to frame k.
  for (std::size_t j = 0; j < tail.poses.size(); ++j) {
    const Pose p = compose(head.poses[k], tail.poses[j]);
    EXPECT_LT((p.translation - all.poses[k + j].translation).norm(), 1e-12) << j;
    EXPECT_LT((p.rotation - all.poses[k + j].rotation).norm(), 1e-12) << j;
  }
}

TEST(ChainSnippets, RejectsMismatchedLengths) {
  const Trajectory gt = circle(6);
  const std::vector<Snippet> s{slice_snippet(gt, 0, 3), slice_snippet(gt, 1, 4)};
  try {
    chain_snippets(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OverlapMismatch);
  }
  EXPECT_THROW(chain_snippets(std::span<const Snippet>{}), Error);
}

TEST(Umeyama, IdentityAndConstructedSimilarity) {
  const std::vector<Vec3> x{{0, 0, 0}, {1, 0, 0}, {0, 2, 0}, {0, 0, 3}, {1, 1, 1}};
  const Similarity id = umeyama_align(x, x);
  EXPECT_NEAR(id.scale, 1.0, 1e-12);
  EXPECT_LT((id.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(id.translation.norm(), 1e-12);
  std::vector<Vec3> y;
  for (const Vec3& p : x) y.push_back(2.0 * p + Vec3::Ones());
  const Similarity s = umeyama_align(x, y);
  EXPECT_NEAR(s.scale, 2.0, 1e-12);
  EXPECT_LT((s.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT((s.translation - Vec3::Ones()).norm(), 1e-12);
}

TEST(Umeyama, ReflectionIsCorrected) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<Vec3> x, y;
  for (int i = 0; i < 20; ++i) {
    x.push_back({n(rng), n(rng), n(rng)});
    y.push_back({x.back().x(), x.back().y(), -x.back().z()});
  }
  const Similarity s = umeyama_align(x, y);
  EXPECT_NEAR(s.rotation.determinant(), 1.0, 1e-12);
}

TEST(Umeyama, DegenerateInputs) {
  const std::vector<Vec3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  const std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
  for (const auto* pts : {&line, &two}) {
    try {
      umeyama_align(*pts, *pts);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::DegenerateConfiguration);
    }
  }
  EXPECT_THROW(umeyama_align(line, std::span<const Vec3>(line).first(3)), Error);
}

TEST(Umeyama, NoisyRandomSimilarityWithinThreeSigma) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  const double sigma = 0.01;
  for (int trial = 0; trial < 50; ++trial) {
    const Similarity truth{std::exp(0.5 * n(rng)), random_rotation(rng), Vec3{n(rng), n(rng), n(rng)}};
    std::vector<Vec3> x, y;
    for (int i = 0; i < 40; ++i) {
      x.push_back({n(rng), n(rng), n(rng)});
      y.push_back(truth.apply(x.back()) + sigma * Vec3{n(rng), n(rng), n(rng)});
    }
    const Similarity s = umeyama_align(x, y);
    EXPECT_LT(std::abs(s.scale - truth.scale), 3 * sigma);
    EXPECT_LT(rotation_angle(s.rotation.transpose() * truth.rotation), 3 * sigma);
    EXPECT_LT((s.translation - truth.translation).norm(), 3 * sigma);
  }
}

TEST(Umeyama, BeatsRandomCandidates) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<Vec3> x, y;
  for (int i = 0; i < 25; ++i) {
    x.push_back({n(rng), n(rng), n(rng)});
    y.push_back(1.7 * x.back() + Vec3{0.5, -1, 2} + 0.2 * Vec3{n(rng), n(rng), n(rng)});
  }
  const Similarity best = umeyama_align(x, y);
  const double r = residual(best, x, y);
  for (int i = 0; i < 100; ++i) {
    Similarity c = best;
    c.scale *= std::exp(0.05 * n(rng));
    c.rotation = Eigen::AngleAxisd(0.05 * std::abs(n(rng)), Vec3{n(rng), n(rng), n(rng)}.normalized()).toRotationMatrix() *
                 c.rotation;
    c.translation += 0.05 * Vec3{n(rng), n(rng), n(rng)};
    EXPECT_GE(residual(c, x, y), r);
  }
}

TEST(SnippetAte, ExactAndScaled) {
  const Snippet gt = slice_snippet(circle(5), 1, 3);
  EXPECT_EQ(snippet_ate(gt, gt), 0.0);
  EXPECT_NEAR(snippet_ate(scaled(gt, 3.0), gt), 0.0, 1e-15);
  const Snippet other = slice_snippet(circle(6), 2, 4);
  EXPECT_THROW(snippet_ate(other, gt), Error);
}

TEST(SnippetAte, InvariantUnderRescalingEstimate) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  const Snippet gt = slice_snippet(circle(6), 0, 3);
  Snippet est = gt;
  for (std::size_t i = 1; i < 3; ++i) est.poses[i].translation += 0.05 * Vec3{n(rng), n(rng), n(rng)};
  const double base = snippet_ate(est, gt);
  EXPECT_GT(base, 0.0);
  for (double k : {0.125, 4.0, 64.0}) EXPECT_EQ(snippet_ate(scaled(est, k), gt), base) << k;
  for (double k : {0.3, 7.1}) EXPECT_NEAR(snippet_ate(scaled(est, k), gt), base, 1e-15) << k;
}

TEST(SnippetAte, IsotropicNoiseOfOneCentimetre) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  const Snippet gt = slice_snippet(circle(6, 30.0), 0, 3);
  double sum = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Snippet est = gt;
    for (std::size_t i = 1; i < 3; ++i) est.poses[i].translation += 0.01 * Vec3{n(rng), n(rng), n(rng)};
    sum += snippet_ate(est, gt);
  }
  const double mean = sum / 100.0;
  EXPECT_GT(mean, 0.005);
  EXPECT_LT(mean, 0.02);
}

TEST(MedianApe, ZeroOnGroundTruthAndInvariantUnderSimilarity) {
  const Trajectory gt = circle(20);
  EXPECT_LT(median_ape(gt, gt), 1e-12);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  Trajectory est = gt;
  for (Pose& p : est.poses) p.translation += 0.1 * Vec3{n(rng), n(rng), n(rng)};
  const double base = median_ape(est, gt);
  for (int i = 0; i < 10; ++i) {
    const Similarity s{std::exp(n(rng)), random_rotation(rng), 10.0 * Vec3{n(rng), n(rng), n(rng)}};
    EXPECT_LT(std::abs(median_ape(transformed(est, s), gt) - base), 1e-9);
  }
}

TEST(MedianApe, SingleOutlierBarelyMovesTheMedian) {
  const Trajectory gt = circle(41);
  Trajectory est = gt;
  est.poses[20].translation += Vec3{100.0, 0.0, 0.0};
  // The least-squares alignment absorbs part of the outlier (scale and
  // rotation included), so the median is not zero; it stays below the mean.
  const double m = median_ape(est, gt);
  std::vector<double> err;
  const Similarity s = umeyama_align(est, gt);
  for (std::size_t i = 0; i < gt.poses.size(); ++i)
    err.push_back((s.apply(est.poses[i].translation) - gt.poses[i].translation).norm());
  double mean = 0.0;
  for (double e : err) mean += e / static_cast<double>(err.size());
  std::nth_element(err.begin(), err.begin() + 20, err.end());
  EXPECT_NEAR(m, err[20], 1e-12);
  EXPECT_LT(m, mean);
  EXPECT_THROW(median_ape(circle(5), gt), Error);
}

TEST(SequenceAte, CountsWindows) {
  const Trajectory gt = circle(10);
  const AteSummary s = sequence_ate(gt, gt);
  EXPECT_EQ(s.count, 8u);
  EXPECT_EQ(s.mean, 0.0);
  EXPECT_EQ(s.stddev, 0.0);
  EXPECT_EQ(sequence_ate(gt, gt, 5).count, 6u);
}
