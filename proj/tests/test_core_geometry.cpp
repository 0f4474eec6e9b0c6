#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "geoconsist/core_geometry.hpp"

using namespace geoconsist;

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 random_vector(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

Pose random_pose(std::mt19937_64& rng) {
  Vec3 w = random_vector(rng, 1.0);
  w *= std::uniform_real_distribution<double>(0.0, kPi - 0.1)(rng) / w.norm();
  return params_to_pose({w, random_vector(rng, 5.0)});
}

double identity_error(const Pose& p) {
  return (p.rotation - Mat3::Identity()).norm() + p.translation.norm();
}

const Intrinsics kK = Intrinsics::create(100, 100, 50, 50);

}  // namespace

TEST(ScalarGrid, ShapeAndSum) {
  ScalarGrid g(2, 3, 1.5);
  EXPECT_EQ(g.size(), 6u);
  EXPECT_DOUBLE_EQ(g.sum(), 9.0);
  g(1, 2) = 4.0;
  EXPECT_EQ(g.index(1, 2), 5u);
  EXPECT_DOUBLE_EQ(g[5], 4.0);
  EXPECT_THROW(ScalarGrid(2, 2, std::vector<double>(3)), Error);
}

TEST(Intrinsics, MatrixTimesInverseIsIdentity) {
  const Intrinsics k = Intrinsics::create(718.856, 702.1, 607.19, 185.2157);
  EXPECT_LT((k.matrix() * k.inverse_matrix() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(Intrinsics::create(0, 1, 0, 0), Error);
  EXPECT_THROW(Intrinsics::create(1, -1, 0, 0), Error);
}

TEST(Compose, IdentityAndInverse) {
  std::mt19937_64 rng(1);
  const Pose p = random_pose(rng);
  const Pose q = compose(Pose::identity(), p);
  EXPECT_LT((q.rotation - p.rotation).norm() + (q.translation - p.translation).norm(), 1e-15);
  EXPECT_LT(identity_error(compose(p, invert(p))), 1e-12);
}

TEST(Compose, TwoThirtyDegreeZRotationsMakeSixty) {
  const double a = kPi / 6.0;
  const Pose r = params_to_pose({Vec3{0, 0, a}, Vec3::Zero()});
  const Pose c = compose(r, r);
  Mat3 expected;
  expected << std::cos(2 * a), -std::sin(2 * a), 0, std::sin(2 * a), std::cos(2 * a), 0, 0, 0, 1;
  EXPECT_LT((c.rotation - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Compose, AppliesRightOperandFirst) {
  std::mt19937_64 rng(2);
  const Pose a = random_pose(rng), b = random_pose(rng);
  const Vec3 x{0.3, -1.2, 4.0};
  EXPECT_LT((compose(a, b).apply(x) - a.apply(b.apply(x))).norm(), 1e-12);
}

TEST(Invert, Examples) {
  EXPECT_LT(identity_error(invert(Pose::identity())), 1e-15);
  const Pose t = invert(Pose{Mat3::Identity(), Vec3{1, 2, 3}});
  EXPECT_EQ(t.translation, Vec3(-1, -2, -3));
  EXPECT_EQ(t.rotation, Mat3::Identity());
}

TEST(Invert, RandomPosesComposeToIdentity) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Pose p = random_pose(rng);
    EXPECT_LT(identity_error(compose(invert(p), p)), 1e-12);
    EXPECT_LT(identity_error(compose(p, invert(p))), 1e-12);
  }
}

TEST(Rodrigues, ZeroAndQuarterTurn) {
  EXPECT_EQ(rotation_from_vector(Vec3::Zero()), Mat3::Identity());
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((rotation_from_vector(Vec3{0, 0, kPi / 2}) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Rodrigues, MatchesEigenAngleAxis) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Vec3 w = random_vector(rng, 1.5);
    const Mat3 oracle = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
    EXPECT_LT((rotation_from_vector(w) - oracle).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Rodrigues, SmallVectorsRoundTrip) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const Vec3 w = random_vector(rng, 1e-3) * std::pow(10.0, -static_cast<double>(i % 8));
    EXPECT_LT((rotation_to_vector(rotation_from_vector(w)) - w).norm(), 1e-10);
  }
}

TEST(Rodrigues, RoundTripUpToNearlyPi) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 500; ++i) {
    Vec3 w = random_vector(rng, 1.0);
    w *= std::uniform_real_distribution<double>(0.0, kPi - 1e-3)(rng) / w.norm();
    const PoseParams p{w, random_vector(rng, 3.0)};
    const PoseParams back = pose_to_params(params_to_pose(p));
    EXPECT_LT((back.rotation_vector - w).norm(), 1e-9);
    EXPECT_LT((back.translation - p.translation).norm(), 1e-12);
  }
}

TEST(Rodrigues, LogAtPiIsAmbiguous) {
  EXPECT_THROW(rotation_to_vector(rotation_from_vector(Vec3{kPi, 0, 0})), Error);
  try {
    rotation_to_vector(rotation_from_vector(Vec3{0, 0, kPi}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AngleAtPi);
  }
}

TEST(Project, Examples) {
  const PixelCoord a = project(Vec3{0, 0, 1}, kK);
  EXPECT_EQ(a.u, 50.0);
  EXPECT_EQ(a.v, 50.0);
  const PixelCoord b = project(Vec3{1, 0, 2}, kK);
  EXPECT_EQ(b.u, 100.0);
  EXPECT_EQ(b.v, 50.0);
  try {
    project(Vec3{0, 0, -1}, kK);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BehindCamera);
  }
}

TEST(Backproject, Examples) {
  EXPECT_EQ(backproject({50, 50}, 1.0, kK), Vec3(0, 0, 1));
  EXPECT_EQ(backproject({100, 50}, 2.0, kK), Vec3(1, 0, 2));
  try {
    backproject({1, 1}, 0.0, kK);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveDepth);
  }
}

TEST(Backproject, ProjectRoundTrip) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pix(0.0, 100.0), depth(0.01, 100.0);
  for (int i = 0; i < 100; ++i) {
    const PixelCoord p{pix(rng), pix(rng)};
    const PixelCoord q = project(backproject(p, depth(rng), kK), kK);
    EXPECT_NEAR(q.u, p.u, 1e-9);
    EXPECT_NEAR(q.v, p.v, 1e-9);
  }
}

TEST(Compose, DeterminantStaysOneOverManyCompositions) {
  std::mt19937_64 rng(8);
  Pose acc = Pose::identity();
  for (int i = 0; i < 1000; ++i) {
    acc = compose(acc, random_pose(rng));
    ASSERT_LT(std::abs(acc.rotation.determinant() - 1.0), 1e-9);
    ASSERT_LT(rotation_error(acc.rotation), 1e-9);
  }
}

TEST(Pose, FromRtRejectsNonRotation) {
  Mat3 m = Mat3::Identity();
  m(0, 0) = -1.0;
  EXPECT_THROW(Pose::from_rt(m, Vec3::Zero()), Error);
  m(0, 0) = 1.0 + 1e-6;
  EXPECT_THROW(Pose::from_rt(m, Vec3::Zero()), Error);
}

TEST(RotationJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 w = random_vector(rng, 1.2);
    const auto jac = rotation_jacobian(w);
    for (int i = 0; i < 3; ++i) {
      const double h = 1e-6;
      Vec3 wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const Mat3 fd = (rotation_from_vector(wp) - rotation_from_vector(wm)) / (2 * h);
      EXPECT_LT((fd - jac[static_cast<std::size_t>(i)]).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(RotationJacobian, AtZeroIsSkewGenerators) {
  const auto jac = rotation_jacobian(Vec3::Zero());
  for (int i = 0; i < 3; ++i) EXPECT_EQ(jac[static_cast<std::size_t>(i)], skew(Vec3::Unit(i)));
}

TEST(ComposeBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  const PoseParams pa{random_vector(rng, 0.8), random_vector(rng, 2.0)};
  const PoseParams pb{random_vector(rng, 0.8), random_vector(rng, 2.0)};
  const Vec3 x{0.4, -0.7, 2.5};
  const Vec3 c{1.0, -2.0, 0.5};
  auto f = [&](const PoseParams& a, const PoseParams& b) {
    return c.dot(compose(params_to_pose(a), params_to_pose(b)).apply(x));
  };
  const Pose a = params_to_pose(pa), b = params_to_pose(pb);
  PoseGradient g_out{c * x.transpose(), c}, ga, gb;
  compose_backward(a, b, g_out, ga, gb);
  const Vec6 ana_a = to_param_gradient(ga, pa);
  const Vec6 ana_b = to_param_gradient(gb, pb);
  for (int i = 0; i < 6; ++i) {
    const double h = 1e-6;
    Vec6 vp = pa.to_vector(), vm = vp;
    vp[i] += h;
    vm[i] -= h;
    EXPECT_NEAR((f(PoseParams::from_vector(vp), pb) - f(PoseParams::from_vector(vm), pb)) / (2 * h), ana_a[i], 1e-7);
    vp = pb.to_vector();
    vm = vp;
    vp[i] += h;
    vm[i] -= h;
    EXPECT_NEAR((f(pa, PoseParams::from_vector(vp)) - f(pa, PoseParams::from_vector(vm))) / (2 * h), ana_b[i], 1e-7);
  }
}

TEST(InvertBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const PoseParams p{random_vector(rng, 0.8), random_vector(rng, 2.0)};
  const Vec3 x{-0.4, 0.9, 1.5};
  const Vec3 c{0.3, 1.0, -1.0};
  auto f = [&](const PoseParams& q) { return c.dot(invert(params_to_pose(q)).apply(x)); };
  PoseGradient g;
  invert_backward(params_to_pose(p), PoseGradient{c * x.transpose(), c}, g);
  const Vec6 ana = to_param_gradient(g, p);
  for (int i = 0; i < 6; ++i) {
    const double h = 1e-6;
    Vec6 vp = p.to_vector(), vm = vp;
    vp[i] += h;
    vm[i] -= h;
    EXPECT_NEAR((f(PoseParams::from_vector(vp)) - f(PoseParams::from_vector(vm))) / (2 * h), ana[i], 1e-7);
  }
}
