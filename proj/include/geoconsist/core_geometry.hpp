#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "geoconsist/errors.hpp"

namespace geoconsist {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

/// Row-major H x W grid of doubles. Holds one image channel, a depth map,
/// an error map or a gradient buffer.
class ScalarGrid {
 public:
  ScalarGrid() = default;
  ScalarGrid(int height, int width, double fill = 0.0);
  ScalarGrid(int height, int width, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(int row, int col) { return values_[index(row, col)]; }
  double operator()(int row, int col) const { return values_[index(row, col)]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }
  bool same_shape(const ScalarGrid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  double sum() const;
  double mean() const;
  bool all_finite() const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// Multi-channel image; every channel has the same shape.
using Image = std::vector<ScalarGrid>;

/// H x W grid of 0/1 flags.
class BinaryGrid {
 public:
  BinaryGrid() = default;
  BinaryGrid(int height, int width, bool fill = false);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return flags_.size(); }

  bool operator()(int row, int col) const { return flags_[index(row, col)] != 0; }
  bool operator[](std::size_t i) const { return flags_[i] != 0; }
  void set(std::size_t i, bool on) { flags_[i] = on ? 1 : 0; }
  void set(int row, int col, bool on) { set(index(row, col), on); }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }
  bool same_shape(const BinaryGrid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool same_shape(const ScalarGrid& other) const {
    return height_ == other.height() && width_ == other.width();
  }
  std::size_t count() const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> flags_;
};

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

/// Pinhole intrinsics without skew.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws InvalidArgument unless fx, fy > 0 and all entries are finite.
  static Intrinsics create(double fx, double fy, double cx, double cy);

  Mat3 matrix() const;
  Mat3 inverse_matrix() const;
  /// K^-1 (u, v, 1).
  Vec3 ray(const PixelCoord& p) const {
    return {(p.u - cx) / fx, (p.v - cy) / fy, 1.0};
  }
};

/// Rigid transform x -> R x + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  /// Validates orthonormality (det +1) within 1e-9.
  static Pose from_rt(const Mat3& rotation, const Vec3& translation);

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
};

/// Axis-angle rotation plus translation; the 6-DoF coordinates every pose
/// gradient is expressed in. Vector layout: (rx, ry, rz, tx, ty, tz).
struct PoseParams {
  Vec3 rotation_vector = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  Vec6 to_vector() const;
  static PoseParams from_vector(const Vec6& v);
};

Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);

Mat3 rotation_from_vector(const Vec3& rotation_vector);
Vec3 rotation_to_vector(const Mat3& rotation);
Pose params_to_pose(const PoseParams& params);
PoseParams pose_to_params(const Pose& pose);

/// Nearest rotation matrix in the Frobenius sense.
Mat3 project_to_rotation(const Mat3& m);

/// Largest absolute deviation of R^T R from identity, plus |det R - 1|.
double rotation_error(const Mat3& r);

PixelCoord project(const Vec3& point, const Intrinsics& k);
Vec3 backproject(const PixelCoord& p, double depth, const Intrinsics& k);

Mat3 skew(const Vec3& v);

// ---------------------------------------------------------------------------
// Reverse-mode helpers. Pose gradients are accumulated in matrix form (dL/dR
// entries, dL/dt) and mapped to PoseParams coordinates at the end.

struct PoseGradient {
  Mat3 rotation = Mat3::Zero();
  Vec3 translation = Vec3::Zero();

  PoseGradient& operator+=(const PoseGradient& o) {
    rotation += o.rotation;
    translation += o.translation;
    return *this;
  }
};

/// dR/d(rotation_vector_i) for i = 0, 1, 2.
std::array<Mat3, 3> rotation_jacobian(const Vec3& rotation_vector);

/// Chain a matrix-form gradient into the 6 PoseParams coordinates.
Vec6 to_param_gradient(const PoseGradient& g, const PoseParams& params);

/// Given dL/d(compose(a, b)), accumulate dL/da and dL/db.
void compose_backward(const Pose& a, const Pose& b, const PoseGradient& g_out,
                      PoseGradient& g_a, PoseGradient& g_b);
/// Given dL/d(invert(p)), accumulate dL/dp.
void invert_backward(const Pose& p, const PoseGradient& g_out, PoseGradient& g_p);

}  // namespace geoconsist
