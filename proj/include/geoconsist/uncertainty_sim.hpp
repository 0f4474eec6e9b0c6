#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "geoconsist/errors.hpp"

namespace geoconsist {

using Vec2d = Eigen::Vector2d;
using Mat2d = Eigen::Matrix2d;
using Mat23d = Eigen::Matrix<double, 2, 3>;

/// 1-D camera observing the plane: p = (P X)_0 / (P X)_1 with X = (x, y, 1).
struct LineCamera {
  Mat23d p_matrix = Mat23d::Zero();

  /// Throws InvalidArgument unless the matrix has rank 2.
  static LineCamera create(const Mat23d& p);
  /// Camera centred at `center` looking along `heading` (normalized
  /// internally) with focal length `focal`; the image axis points to the
  /// right of the heading.
  static LineCamera looking(const Vec2d& center, const Vec2d& heading, double focal = 1.0);

  /// Throws ProjectionSingular when |(P X)_1| < 1e-12.
  double project(const Vec2d& x) const;
  /// (P X)_1, positive in front of the camera for cameras built by `looking`.
  double forward_depth(const Vec2d& x) const;
};

/// Noisy projection f(X) + N(0, sigma^2); deterministic for a given seed.
/// Throws ProjectionSingular, InvalidArgument for sigma < 0.
double observe(const LineCamera& cam, const Vec2d& x, double sigma, std::uint64_t seed);

/// Axis-aligned grid; density samples sit at cell centres.
struct GridSpec {
  double x_min = -1.0;
  double x_max = 1.0;
  double y_min = -1.0;
  double y_max = 1.0;
  int nx = 512;
  int ny = 512;

  void validate() const;
  double cell_width() const { return (x_max - x_min) / nx; }
  double cell_height() const { return (y_max - y_min) / ny; }
  Vec2d cell_center(int ix, int iy) const {
    return {x_min + (ix + 0.5) * cell_width(), y_min + (iy + 0.5) * cell_height()};
  }
};

struct PosteriorGrid {
  GridSpec domain;
  std::vector<double> density;  // row-major, ny rows of nx cells
  double cell_area = 0.0;

  double at(int ix, int iy) const { return density[static_cast<std::size_t>(iy) * domain.nx + ix]; }
  double total_mass() const;
  Vec2d mean() const;
  Mat2d covariance() const;
  Vec2d mode() const;
  /// Largest density on the outermost ring of cells divided by the maximum.
  double boundary_ratio() const;
};

struct PosteriorOptions {
  bool check_boundary = true;
  double boundary_tolerance = 1e-6;
};

/// Uniform prior times the two Gaussian likelihoods, normalized over the
/// grid. Points behind either camera get density 0. Throws InvalidArgument
/// for sigma <= 0, GridTooSmall when the boundary check fails.
PosteriorGrid posterior(const std::array<LineCamera, 2>& cams, const std::array<double, 2>& obs, double sigma,
                        const GridSpec& grid, const PosteriorOptions& opts = {});

/// Two cameras at distance `distance` from the point (0, distance), the first
/// at the origin looking along +y, the second rotated about the point so the
/// rays meet at `angle_deg`.
std::array<LineCamera, 2> canonical_pair(double angle_deg, double distance = 10.0, double focal = 1.0);

/// Grid centred on `x` spanning +-`sigmas` linearized standard deviations
/// along each axis.
GridSpec linearized_grid(const std::array<LineCamera, 2>& cams, const Vec2d& x, double sigma, double sigmas = 8.0,
                         int cells = 512);

struct BaselineSample {
  double angle_deg = 0.0;
  double largest_eigenvalue = 0.0;
  double mass = 0.0;  // normalization check, should be 1
};

/// For each angle in (0, 90], the largest eigenvalue of the grid covariance of
/// the posterior for the canonical pair with noiseless observations of the
/// point. The grid grows by 1.5x until the boundary check passes.
std::vector<BaselineSample> uncertainty_vs_baseline(std::span<const double> angles_deg, double sigma,
                                                    int cells = 512);

}  // namespace geoconsist
