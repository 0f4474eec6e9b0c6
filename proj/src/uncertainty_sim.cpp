#include "geoconsist/uncertainty_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace geoconsist {

LineCamera LineCamera::create(const Mat23d& p) {
  if (!p.allFinite()) throw Error(ErrorCode::InvalidArgument, "camera matrix is not finite");
  Eigen::FullPivLU<Mat23d> lu(p);
  if (lu.rank() < 2) throw Error(ErrorCode::InvalidArgument, "camera matrix must have rank 2");
  return LineCamera{p};
}

LineCamera LineCamera::looking(const Vec2d& center, const Vec2d& heading, double focal) {
  if (!(heading.norm() > 0.0) || !(focal > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "camera needs a heading and a positive focal length");
  }
  const Vec2d d = heading.normalized();
  const Vec2d r{d.y(), -d.x()};
  Mat23d p;
  p << focal * r.x(), focal * r.y(), -focal * r.dot(center), d.x(), d.y(), -d.dot(center);
  return create(p);
}

double LineCamera::forward_depth(const Vec2d& x) const { return p_matrix.row(1).dot(Eigen::Vector3d{x.x(), x.y(), 1.0}); }

double LineCamera::project(const Vec2d& x) const {
  const Eigen::Vector2d h = p_matrix * Eigen::Vector3d{x.x(), x.y(), 1.0};
  if (std::abs(h[1]) < 1e-12) throw Error(ErrorCode::ProjectionSingular, "point lies on the camera's focal line");
  return h[0] / h[1];
}

double observe(const LineCamera& cam, const Vec2d& x, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  const double p = cam.project(x);
  if (sigma == 0.0) return p;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  return p + n(rng);
}

void GridSpec::validate() const {
  if (nx < 2 || ny < 2 || !(x_max > x_min) || !(y_max > y_min)) {
    throw Error(ErrorCode::InvalidArgument, "grid needs at least 2x2 cells and a positive extent");
  }
}

double PosteriorGrid::total_mass() const {
  double s = 0.0;
  for (double d : density) s += d;
  return s * cell_area;
}

Vec2d PosteriorGrid::mean() const {
  Vec2d m = Vec2d::Zero();
  for (int iy = 0; iy < domain.ny; ++iy)
    for (int ix = 0; ix < domain.nx; ++ix) m += at(ix, iy) * domain.cell_center(ix, iy);
  return m * cell_area;
}

Mat2d PosteriorGrid::covariance() const {
  const Vec2d m = mean();
  Mat2d c = Mat2d::Zero();
  for (int iy = 0; iy < domain.ny; ++iy) {
    for (int ix = 0; ix < domain.nx; ++ix) {
      const Vec2d d = domain.cell_center(ix, iy) - m;
      c += at(ix, iy) * d * d.transpose();
    }
  }
  return c * cell_area;
}

Vec2d PosteriorGrid::mode() const {
  const auto it = std::max_element(density.begin(), density.end());
  const auto i = static_cast<int>(it - density.begin());
  return domain.cell_center(i % domain.nx, i / domain.nx);
}

double PosteriorGrid::boundary_ratio() const {
  const double peak = *std::max_element(density.begin(), density.end());
  if (!(peak > 0.0)) return 0.0;
  double edge = 0.0;
  for (int ix = 0; ix < domain.nx; ++ix) edge = std::max({edge, at(ix, 0), at(ix, domain.ny - 1)});
  for (int iy = 0; iy < domain.ny; ++iy) edge = std::max({edge, at(0, iy), at(domain.nx - 1, iy)});
  return edge / peak;
}

PosteriorGrid posterior(const std::array<LineCamera, 2>& cams, const std::array<double, 2>& obs, double sigma,
                        const GridSpec& grid, const PosteriorOptions& opts) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
  grid.validate();
  PosteriorGrid out;
  out.domain = grid;
  out.cell_area = grid.cell_width() * grid.cell_height();
  out.density.assign(static_cast<std::size_t>(grid.nx) * static_cast<std::size_t>(grid.ny), 0.0);

  // Log-likelihoods are shifted by their maximum before exponentiation.
  std::vector<double> log_l(out.density.size(), -std::numeric_limits<double>::infinity());
  double best = -std::numeric_limits<double>::infinity();
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const Vec2d x = grid.cell_center(ix, iy);
      double acc = 0.0;
      bool visible = true;
      for (int c = 0; c < 2; ++c) {
        const double depth = cams[c].forward_depth(x);
        if (depth < 1e-12) {
          visible = false;
          break;
        }
        const double r = cams[c].project(x) - obs[c];
        acc -= r * r * inv2s2;
      }
      if (!visible) continue;
      const std::size_t i = static_cast<std::size_t>(iy) * grid.nx + ix;
      log_l[i] = acc;
      best = std::max(best, acc);
    }
  }
  if (!std::isfinite(best)) throw Error(ErrorCode::GridTooSmall, "no grid cell is visible to both cameras");
  double sum = 0.0;
  for (std::size_t i = 0; i < log_l.size(); ++i) {
    out.density[i] = std::exp(log_l[i] - best);
    sum += out.density[i];
  }
  const double norm = 1.0 / (sum * out.cell_area);
  for (double& d : out.density) d *= norm;

  if (opts.check_boundary && out.boundary_ratio() >= opts.boundary_tolerance) {
    throw Error(ErrorCode::GridTooSmall, "posterior mass reaches the grid boundary");
  }
  return out;
}

std::array<LineCamera, 2> canonical_pair(double angle_deg, double distance, double focal) {
  if (!(angle_deg > 0.0 && angle_deg <= 180.0) || !(distance > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "baseline angle must be in (0, 180] degrees");
  }
  const double a = angle_deg * std::numbers::pi / 180.0;
  const Vec2d target{0.0, distance};
  const Vec2d c2 = target + distance * Vec2d{std::sin(a), -std::cos(a)};
  return {LineCamera::looking(Vec2d::Zero(), Vec2d::UnitY(), focal), LineCamera::looking(c2, target - c2, focal)};
}

GridSpec linearized_grid(const std::array<LineCamera, 2>& cams, const Vec2d& x, double sigma, double sigmas,
                         int cells) {
  Mat2d info = Mat2d::Zero();
  for (const LineCamera& cam : cams) {
    const Eigen::Vector3d xh{x.x(), x.y(), 1.0};
    const double num = cam.p_matrix.row(0).dot(xh);
    const double den = cam.p_matrix.row(1).dot(xh);
    if (std::abs(den) < 1e-12) throw Error(ErrorCode::ProjectionSingular, "point lies on a focal line");
    const Vec2d j = (cam.p_matrix.row(0).head<2>().transpose() * den - cam.p_matrix.row(1).head<2>().transpose() * num) /
                    (den * den);
    info += j * j.transpose() / (sigma * sigma);
  }
  Eigen::FullPivLU<Mat2d> lu(info);
  if (!lu.isInvertible()) throw Error(ErrorCode::DegenerateConfiguration, "rays are parallel at the point");
  const Mat2d cov = lu.inverse();
  const double hx = sigmas * std::sqrt(cov(0, 0));
  const double hy = sigmas * std::sqrt(cov(1, 1));
  return {x.x() - hx, x.x() + hx, x.y() - hy, x.y() + hy, cells, cells};
}

std::vector<BaselineSample> uncertainty_vs_baseline(std::span<const double> angles_deg, double sigma, int cells) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
  std::vector<BaselineSample> out;
  const double distance = 10.0;
  const Vec2d point{0.0, distance};
  for (double angle : angles_deg) {
    if (!(angle > 0.0 && angle <= 90.0)) throw Error(ErrorCode::InvalidArgument, "angles must lie in (0, 90]");
    const auto cams = canonical_pair(angle, distance);
    const std::array<double, 2> obs{cams[0].project(point), cams[1].project(point)};
    GridSpec grid = linearized_grid(cams, point, sigma, 8.0, cells);
    for (int attempt = 0;; ++attempt) {
      try {
        const PosteriorGrid post = posterior(cams, obs, sigma, grid);
        Eigen::SelfAdjointEigenSolver<Mat2d> es(post.covariance());
        out.push_back({angle, es.eigenvalues().maxCoeff(), post.total_mass()});
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::GridTooSmall || attempt >= 12) throw;
        const Vec2d c{0.5 * (grid.x_min + grid.x_max), 0.5 * (grid.y_min + grid.y_max)};
        const double hx = 0.75 * (grid.x_max - grid.x_min);
        const double hy = 0.75 * (grid.y_max - grid.y_min);
        grid = {c.x() - hx, c.x() + hx, c.y() - hy, c.y() + hy, cells, cells};
      }
    }
  }
  return out;
}

}  // namespace geoconsist
