#include "geoconsist/core_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "compensated_sum.hpp"

namespace geoconsist {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::AngleAtPi: return "AngleAtPi";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DegenerateTranslation: return "DegenerateTranslation";
    case ErrorCode::EmptyMatchSet: return "EmptyMatchSet";
    case ErrorCode::ZeroSynthMean: return "ZeroSynthMean";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::OverlapMismatch: return "OverlapMismatch";
    case ErrorCode::ProjectionSingular: return "ProjectionSingular";
    case ErrorCode::GridTooSmall: return "GridTooSmall";
    case ErrorCode::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::InsufficientVisibility: return "InsufficientVisibility";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------

ScalarGrid::ScalarGrid(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::InvalidArgument, "grid dimensions must be positive");
  }
  values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

ScalarGrid::ScalarGrid(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::InvalidArgument, "grid dimensions must be positive");
  }
  if (values_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw Error(ErrorCode::InvalidArgument, "grid value count does not match height*width");
  }
}

double ScalarGrid::sum() const {
  detail::CompensatedSum s;
  for (double v : values_) s += v;
  return s.value();
}

double ScalarGrid::mean() const { return values_.empty() ? 0.0 : sum() / static_cast<double>(values_.size()); }

bool ScalarGrid::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

BinaryGrid::BinaryGrid(int height, int width, bool fill) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::InvalidArgument, "grid dimensions must be positive");
  }
  flags_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill ? 1 : 0);
}

std::size_t BinaryGrid::count() const {
  return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), std::uint8_t{1}));
}

// ---------------------------------------------------------------------------

Intrinsics Intrinsics::create(double fx, double fy, double cx, double cy) {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorCode::InvalidArgument, "intrinsics need finite fx, fy > 0");
  }
  return {fx, fy, cx, cy};
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 Intrinsics::inverse_matrix() const {
  Mat3 k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

double rotation_error(const Mat3& r) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(r.determinant() - 1.0));
}

Pose Pose::from_rt(const Mat3& rotation, const Vec3& translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "pose has non-finite entries");
  }
  if (rotation_error(rotation) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "rotation is not orthonormal with det +1");
  }
  return {rotation, translation};
}

Vec6 PoseParams::to_vector() const {
  Vec6 v;
  v << rotation_vector, translation;
  return v;
}

PoseParams PoseParams::from_vector(const Vec6& v) {
  return {v.head<3>(), v.tail<3>()};
}

Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  if ((out.rotation.transpose() * out.rotation - Mat3::Identity()).norm() > 1e-12) {
    out.rotation = project_to_rotation(out.rotation);
  }
  return out;
}

Pose invert(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

namespace {

Vec3 vee(const Mat3& s) { return {s(2, 1), s(0, 2), s(1, 0)}; }

constexpr double kSmallAngle = 1e-3;

}  // namespace

Mat3 rotation_from_vector(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 k = skew(w);
  double a, b;
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 rotation_to_vector(const Mat3& r) {
  const Vec3 axis_sin = 0.5 * vee(r - r.transpose());  // sin(theta) * axis
  const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double sin_theta = axis_sin.norm();
  const double theta = std::atan2(sin_theta, cos_theta);
  if (std::numbers::pi - theta < 1e-9) {
    throw Error(ErrorCode::AngleAtPi, "rotation angle is within 1e-9 of pi; log map is ambiguous");
  }
  if (theta < kSmallAngle) {
    // theta / sin(theta) series
    const double t2 = theta * theta;
    return (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * axis_sin;
  }
  if (std::numbers::pi - theta < 1e-3) {
    // Near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part (1 - cos) a a^T and take the sign from axis_sin.
    const Mat3 b = 0.5 * (r + r.transpose()) - cos_theta * Mat3::Identity();
    Eigen::Index col = 0;
    b.diagonal().maxCoeff(&col);
    Vec3 axis = b.col(col).normalized();
    if (axis.dot(axis_sin) < 0.0) axis = -axis;
    return theta * axis;
  }
  return (theta / sin_theta) * axis_sin;
}

Pose params_to_pose(const PoseParams& params) {
  return {rotation_from_vector(params.rotation_vector), params.translation};
}

PoseParams pose_to_params(const Pose& pose) {
  return {rotation_to_vector(pose.rotation), pose.translation};
}

PixelCoord project(const Vec3& point, const Intrinsics& k) {
  if (point.z() <= 1e-9) {
    throw Error(ErrorCode::BehindCamera, "point depth must exceed 1e-9 to project");
  }
  return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

Vec3 backproject(const PixelCoord& p, double depth, const Intrinsics& k) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth, "backprojection needs positive depth");
  }
  return depth * k.ray(p);
}

// ---------------------------------------------------------------------------

std::array<Mat3, 3> rotation_jacobian(const Vec3& w) {
  std::array<Mat3, 3> d;
  const double theta2 = w.squaredNorm();
  if (std::sqrt(theta2) < kSmallAngle) {
    // d/dw_i of sum_n [w]^n / n!, truncated after n = 5.
    const Mat3 k = skew(w);
    std::array<Mat3, 5> pow;  // pow[j] = k^j
    pow[0] = Mat3::Identity();
    for (int j = 1; j < 5; ++j) pow[j] = pow[j - 1] * k;
    for (int i = 0; i < 3; ++i) {
      const Mat3 e = skew(Vec3::Unit(i));
      Mat3 acc = Mat3::Zero();
      double fact = 1.0;
      for (int n = 1; n <= 5; ++n) {
        fact *= n;
        Mat3 term = Mat3::Zero();
        for (int j = 0; j < n; ++j) term += pow[j] * e * pow[n - 1 - j];
        acc += term / fact;
      }
      d[i] = acc;
    }
    return d;
  }
  const Mat3 r = rotation_from_vector(w);
  const Mat3 k = skew(w);
  const Mat3 i_minus_r = Mat3::Identity() - r;
  for (int i = 0; i < 3; ++i) {
    const Vec3 c = w.cross(i_minus_r.col(i));
    d[i] = ((w[i] * k + skew(c)) / theta2) * r;
  }
  return d;
}

Vec6 to_param_gradient(const PoseGradient& g, const PoseParams& params) {
  const auto d = rotation_jacobian(params.rotation_vector);
  Vec6 out;
  for (int i = 0; i < 3; ++i) out[i] = d[i].cwiseProduct(g.rotation).sum();
  out.tail<3>() = g.translation;
  return out;
}

void compose_backward(const Pose& a, const Pose& b, const PoseGradient& g_out,
                      PoseGradient& g_a, PoseGradient& g_b) {
  // R = Ra Rb, t = Ra tb + ta
  g_a.rotation += g_out.rotation * b.rotation.transpose() + g_out.translation * b.translation.transpose();
  g_a.translation += g_out.translation;
  g_b.rotation += a.rotation.transpose() * g_out.rotation;
  g_b.translation += a.rotation.transpose() * g_out.translation;
}

void invert_backward(const Pose& p, const PoseGradient& g_out, PoseGradient& g_p) {
  // R' = R^T, t' = -R^T t
  g_p.rotation += g_out.rotation.transpose() - p.translation * g_out.translation.transpose();
  g_p.translation += -(p.rotation * g_out.translation);
}

}  // namespace geoconsist
