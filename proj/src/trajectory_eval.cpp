#include "geoconsist/trajectory_eval.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace geoconsist {

void Trajectory::validate() const {
  if (poses.empty()) throw Error(ErrorCode::InvalidArgument, "trajectory is empty");
  for (const Pose& p : poses) {
    if (rotation_error(p.rotation) > 1e-6) throw Error(ErrorCode::InvalidArgument, "trajectory rotation is not valid");
  }
}

void Snippet::validate() const {
  if (poses.empty()) throw Error(ErrorCode::InvalidArgument, "snippet is empty");
  const Pose& p = poses.front();
  if ((p.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-12 || p.translation.cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "snippet must start with the identity pose");
  }
}

Snippet slice_snippet(const Trajectory& traj, std::size_t first, std::size_t length) {
  if (length == 0 || first + length > traj.poses.size()) {
    throw Error(ErrorCode::LengthMismatch, "snippet window exceeds the trajectory");
  }
  Snippet s;
  const Pose anchor = invert(traj.poses[first]);
  s.poses.push_back(Pose::identity());
  for (std::size_t i = 1; i < length; ++i) s.poses.push_back(compose(anchor, traj.poses[first + i]));
  return s;
}

namespace {

struct FrameAccumulator {
  Vec3 position_sum = Vec3::Zero();
  Eigen::Vector4d quat_sum = Eigen::Vector4d::Zero();
  Eigen::Vector4d reference = Eigen::Vector4d::Zero();
  int count = 0;

  void add(const Pose& p) {
    Eigen::Quaterniond q(p.rotation);
    Eigen::Vector4d v = q.coeffs();
    if (count == 0) reference = v;
    if (v.dot(reference) < 0.0) v = -v;
    quat_sum += v;
    position_sum += p.translation;
    ++count;
  }

  Pose estimate() const {
    if (count == 1) {
      Eigen::Quaterniond q;
      q.coeffs() = reference;
      return {q.normalized().toRotationMatrix(), position_sum};
    }
    Eigen::Quaterniond q;
    q.coeffs() = quat_sum.normalized();
    return {q.toRotationMatrix(), position_sum / count};
  }
};

}  // namespace

Trajectory chain_snippets(std::span<const Snippet> snippets) {
  if (snippets.empty()) throw Error(ErrorCode::OverlapMismatch, "nothing to chain");
  const std::size_t n = snippets.front().poses.size();
  for (const Snippet& s : snippets) {
    s.validate();
    if (s.poses.size() != n) throw Error(ErrorCode::OverlapMismatch, "snippets differ in length");
  }
  if (snippets.size() > 1 && n < 2) throw Error(ErrorCode::OverlapMismatch, "snippets are too short to overlap");

  std::vector<FrameAccumulator> acc(n + snippets.size() - 1);
  for (std::size_t i = 0; i < n; ++i) acc[i].add(snippets.front().poses[i]);

  for (std::size_t k = 1; k < snippets.size(); ++k) {
    const Snippet& s = snippets[k];
    const Pose anchor = acc[k].estimate();
    const Pose anchor_inv = invert(anchor);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const Vec3 chained = compose(anchor_inv, acc[k + i].estimate()).translation;
      num += chained.dot(s.poses[i].translation);
      den += s.poses[i].translation.squaredNorm();
    }
    const double scale = den > 0.0 ? num / den : 1.0;
    for (std::size_t i = 1; i < n; ++i) {
      acc[k + i].add(compose(anchor, Pose{s.poses[i].rotation, scale * s.poses[i].translation}));
    }
  }

  Trajectory out;
  for (const FrameAccumulator& a : acc) out.poses.push_back(a.estimate());
  return out;
}

Similarity umeyama_align(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) throw Error(ErrorCode::LengthMismatch, "point sets differ in length");
  if (src.size() < 3) throw Error(ErrorCode::DegenerateConfiguration, "alignment needs at least 3 points");
  const double n = static_cast<double>(src.size());
  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;
  Mat3 cov = Mat3::Zero();
  Mat3 spread = Mat3::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - mu_s;
    cov += (dst[i] - mu_d) * a.transpose();
    spread += a * a.transpose();
    var_s += a.squaredNorm();
  }
  cov /= n;
  var_s /= n;

  Eigen::JacobiSVD<Mat3> spread_svd(spread);
  const Vec3 sv = spread_svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) {
    throw Error(ErrorCode::DegenerateConfiguration, "source points are collinear or coincident");
  }

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 s = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2, 2) = -1.0;
  Similarity out;
  out.rotation = svd.matrixU() * s * svd.matrixV().transpose();
  out.scale = (svd.singularValues().asDiagonal() * s).trace() / var_s;
  out.translation = mu_d - out.scale * out.rotation * mu_s;
  return out;
}

namespace {

std::vector<Vec3> positions(const std::vector<Pose>& poses) {
  std::vector<Vec3> out;
  out.reserve(poses.size());
  for (const Pose& p : poses) out.push_back(p.translation);
  return out;
}

}  // namespace

Similarity umeyama_align(const Trajectory& est, const Trajectory& gt) {
  const auto a = positions(est.poses);
  const auto b = positions(gt.poses);
  return umeyama_align(a, b);
}

double snippet_ate(const Snippet& est, const Snippet& gt) {
  if (est.poses.size() != gt.poses.size()) throw Error(ErrorCode::LengthMismatch, "snippets differ in length");
  if (est.poses.empty()) throw Error(ErrorCode::LengthMismatch, "snippets are empty");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < est.poses.size(); ++i) {
    num += est.poses[i].translation.dot(gt.poses[i].translation);
    den += est.poses[i].translation.squaredNorm();
  }
  const double s = den > 0.0 ? num / den : 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < est.poses.size(); ++i) {
    sq += (s * est.poses[i].translation - gt.poses[i].translation).squaredNorm();
  }
  return std::sqrt(sq / static_cast<double>(est.poses.size()));
}

double median_ape(const Trajectory& est, const Trajectory& gt) {
  if (est.poses.size() != gt.poses.size()) throw Error(ErrorCode::LengthMismatch, "trajectories differ in length");
  const Similarity sim = umeyama_align(est, gt);
  std::vector<double> err;
  err.reserve(est.poses.size());
  for (std::size_t i = 0; i < est.poses.size(); ++i) {
    err.push_back((sim.apply(est.poses[i].translation) - gt.poses[i].translation).norm());
  }
  std::sort(err.begin(), err.end());
  const std::size_t m = err.size();
  return m % 2 == 1 ? err[m / 2] : 0.5 * (err[m / 2 - 1] + err[m / 2]);
}

AteSummary sequence_ate(const Trajectory& est, const Trajectory& gt, std::size_t length) {
  if (est.poses.size() != gt.poses.size()) throw Error(ErrorCode::LengthMismatch, "trajectories differ in length");
  if (length < 2 || length > est.poses.size()) throw Error(ErrorCode::LengthMismatch, "invalid snippet length");
  std::vector<double> values;
  for (std::size_t i = 0; i + length <= est.poses.size(); ++i) {
    values.push_back(snippet_ate(slice_snippet(est, i, length), slice_snippet(gt, i, length)));
  }
  AteSummary out;
  out.count = values.size();
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  for (double v : values) out.stddev += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(out.stddev / static_cast<double>(values.size()));
  return out;
}

}  // namespace geoconsist
