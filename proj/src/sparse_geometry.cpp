#include "geoconsist/sparse_geometry.hpp"

#include <cmath>

#include "geoconsist/view_synthesis.hpp"

namespace geoconsist {

EssentialMatrix essential_from_pose(const Pose& pose) {
  if (pose.translation.norm() <= 1e-12) {
    throw Error(ErrorCode::DegenerateTranslation, "essential matrix needs a non-zero translation");
  }
  return {skew(pose.translation) * pose.rotation};
}

std::pair<double, double> symmetric_epipolar_distances(const Mat3& e, const Vec3& p, const Vec3& q, double epsilon) {
  const double r = q.dot(e * p);
  const Vec3 a = e * p;
  const Vec3 b = e.transpose() * q;
  return {r / std::sqrt(a[0] * a[0] + a[1] * a[1] + epsilon), r / std::sqrt(b[0] * b[0] + b[1] * b[1] + epsilon)};
}

namespace detail {

double epipolar_accumulate(const MatchSet& matches, const Pose& pose, const Intrinsics& k_t, const Intrinsics& k_s,
                           const EpipolarOptions& opts, double weight, PoseGradient* grad) {
  if (matches.empty()) throw Error(ErrorCode::EmptyMatchSet, "epipolar loss needs at least one match");
  const Mat3 e = essential_from_pose(pose).e;
  const bool absolute = opts.residual == EpipolarResidual::Absolute;

  double total = 0.0;
  Mat3 g_e = Mat3::Zero();
  for (const Match& m : matches) {
    const Vec3 p = k_t.ray(m.p);
    const Vec3 q = k_s.ray(m.p_prime);
    const Vec3 a = e * p;
    const Vec3 b = e.transpose() * q;
    const double r = q.dot(a);
    const double n1 = std::sqrt(a[0] * a[0] + a[1] * a[1] + opts.epsilon);
    const double n2 = std::sqrt(b[0] * b[0] + b[1] * b[1] + opts.epsilon);
    const double d1 = r / n1;
    const double d2 = r / n2;
    total += absolute ? std::abs(d1) + std::abs(d2) : d1 + d2;
    if (!grad) continue;

    const double f1 = absolute ? static_cast<double>((d1 > 0.0) - (d1 < 0.0)) : 1.0;
    const double f2 = absolute ? static_cast<double>((d2 > 0.0) - (d2 < 0.0)) : 1.0;
    const Mat3 qp = q * p.transpose();
    const Vec3 a_xy{a[0], a[1], 0.0};
    const Vec3 b_xy{b[0], b[1], 0.0};
    g_e += f1 * (qp / n1 - (r / (n1 * n1 * n1)) * (a_xy * p.transpose()));
    g_e += f2 * (qp / n2 - (r / (n2 * n2 * n2)) * (q * b_xy.transpose()));
  }
  if (grad) {
    g_e *= weight;
    const Mat3 s = skew(pose.translation);
    grad->rotation += s.transpose() * g_e;
    const Mat3 g_s = g_e * pose.rotation.transpose();
    grad->translation += Vec3{g_s(2, 1) - g_s(1, 2), g_s(0, 2) - g_s(2, 0), g_s(1, 0) - g_s(0, 1)};
  }
  return total;
}

double reprojection_accumulate(const MatchSet& matches, const Pose& pose, const ScalarGrid& depth,
                               const Intrinsics& k_t, const Intrinsics& k_s, const ReprojectionOptions& opts,
                               double weight, ScalarGrid* grad_depth, PoseGradient* grad_pose, int* penalized) {
  if (matches.empty()) throw Error(ErrorCode::EmptyMatchSet, "re-projection loss needs at least one match");
  const double max_u = depth.width() - 1;
  const double max_v = depth.height() - 1;
  double total = 0.0;
  for (const Match& m : matches) {
    if (!(m.p.u >= 0.0 && m.p.u <= max_u && m.p.v >= 0.0 && m.p.v <= max_v)) {
      throw Error(ErrorCode::InvalidArgument, "match lies outside the target depth map");
    }
    const double d = sample_bilinear(depth, m.p.u, m.p.v);
    if (!(d > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "sampled depth at a match is not positive");
    const Vec3 ray = k_t.ray(m.p);
    const Vec3 x = d * ray;
    const Vec3 y = pose.rotation * x + pose.translation;
    if (y.z() <= 1e-9) {
      total += opts.behind_camera_penalty;
      if (penalized) ++*penalized;
      continue;
    }
    const double iz = 1.0 / y.z();
    const Vec2 res{k_s.fx * y.x() * iz + k_s.cx - m.p_prime.u, k_s.fy * y.y() * iz + k_s.cy - m.p_prime.v};
    const double err = res.norm();
    total += err;
    if (!grad_pose || err < 1e-300) continue;

    const Vec2 g_q = weight * res / err;
    Mat23 j;
    j << k_s.fx * iz, 0.0, -k_s.fx * y.x() * iz * iz, 0.0, k_s.fy * iz, -k_s.fy * y.y() * iz * iz;
    const Vec3 g_y = j.transpose() * g_q;
    grad_pose->rotation += g_y * x.transpose();
    grad_pose->translation += g_y;
    if (grad_depth) scatter_bilinear(m.p.u, m.p.v, g_y.dot(pose.rotation * ray), *grad_depth);
  }
  return total;
}

}  // namespace detail

LossValue epipolar_loss(const MatchSet& matches, const Pose& pose, const Intrinsics& k_t, const Intrinsics& k_s,
                        const EpipolarOptions& opts) {
  PoseGradient g;
  LossValue out;
  out.value = detail::epipolar_accumulate(matches, pose, k_t, k_s, opts, 1.0, &g);
  out.grad_pose.push_back(to_param_gradient(g, pose_to_params(pose)));
  return out;
}

LossValue reprojection_loss(const MatchSet& matches, const Pose& pose, const ScalarGrid& depth_t,
                            const Intrinsics& k_t, const Intrinsics& k_s, const ReprojectionOptions& opts) {
  PoseGradient g;
  LossValue out;
  out.grad_depth = ScalarGrid(depth_t.height(), depth_t.width(), 0.0);
  out.value = detail::reprojection_accumulate(matches, pose, depth_t, k_t, k_s, opts, 1.0, &out.grad_depth, &g,
                                              &out.penalized_matches);
  out.grad_pose.push_back(to_param_gradient(g, pose_to_params(pose)));
  return out;
}

}  // namespace geoconsist
