#include "geoconsist/view_synthesis.hpp"

#include <algorithm>
#include <cmath>

namespace geoconsist {

namespace {

constexpr double kMinProjectedDepth = 1e-9;
// Rounding slack on the image border, so an identity warp keeps its edge pixels.
constexpr double kBorderSlack = 1e-9;

struct Stencil {
  int x0, x1, y0, y1;
  double fx, fy;
};

// Coordinates are clamped to [-1, W] first; beyond that both taps hit the
// same border pixel, so the result is unchanged.
inline int floor_index(double x, double& frac) {
  int i = static_cast<int>(x);
  if (i > x) --i;
  frac = x - i;
  return i;
}

Stencil make_stencil(const ScalarGrid& grid, double u, double v) {
  const int w = grid.width();
  const int h = grid.height();
  Stencil s{};
  const int xi = floor_index(std::clamp(u, -1.0, static_cast<double>(w)), s.fx);
  const int yi = floor_index(std::clamp(v, -1.0, static_cast<double>(h)), s.fy);
  s.x0 = std::clamp(xi, 0, w - 1);
  s.x1 = std::clamp(xi + 1, 0, w - 1);
  s.y0 = std::clamp(yi, 0, h - 1);
  s.y1 = std::clamp(yi + 1, 0, h - 1);
  return s;
}

void check_positive(const ScalarGrid& depth) {
  for (double d : depth.values()) {
    if (!(d > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "depth map must be strictly positive");
  }
}

}  // namespace

WarpField compute_warp(const ScalarGrid& depth_t, const Pose& pose, const Intrinsics& k_t,
                       const Intrinsics& k_s, bool with_jacobians) {
  check_positive(depth_t);
  const int h = depth_t.height();
  const int w = depth_t.width();
  const std::size_t n = depth_t.size();

  WarpField warp;
  warp.height = h;
  warp.width = w;
  warp.pose = pose;
  warp.valid = BinaryGrid(h, w);
  warp.coords.resize(n);
  if (with_jacobians) {
    warp.rays.resize(n);
    warp.target_points.resize(n);
    warp.projection_jacobian.assign(n, Mat23::Zero());
  }

  const double min_uv = -kBorderSlack;
  const double max_u = w - 1 + kBorderSlack;
  const double max_v = h - 1 + kBorderSlack;
  std::vector<double> ray_x(static_cast<std::size_t>(w)), ray_y(static_cast<std::size_t>(h));
  for (int c = 0; c < w; ++c) ray_x[static_cast<std::size_t>(c)] = k_t.ray({static_cast<double>(c), 0.0}).x();
  for (int r = 0; r < h; ++r) ray_y[static_cast<std::size_t>(r)] = k_t.ray({0.0, static_cast<double>(r)}).y();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = depth_t.index(r, c);
      const Vec3 ray{ray_x[static_cast<std::size_t>(c)], ray_y[static_cast<std::size_t>(r)], 1.0};
      const Vec3 x = depth_t[i] * ray;
      const Vec3 y = pose.rotation * x + pose.translation;
      if (with_jacobians) {
        warp.rays[i] = ray;
        warp.target_points[i] = x;
      }
      if (y.z() <= kMinProjectedDepth) {
        warp.coords[i] = {-1.0, -1.0};
        continue;
      }
      const double iz = 1.0 / y.z();
      const PixelCoord p{k_s.fx * y.x() * iz + k_s.cx, k_s.fy * y.y() * iz + k_s.cy};
      warp.coords[i] = p;
      if (with_jacobians) {
        Mat23& j = warp.projection_jacobian[i];
        j << k_s.fx * iz, 0.0, -k_s.fx * y.x() * iz * iz, 0.0, k_s.fy * iz, -k_s.fy * y.y() * iz * iz;
      }
      if (p.u >= min_uv && p.u <= max_u && p.v >= min_uv && p.v <= max_v) warp.valid.set(i, true);
    }
  }
  return warp;
}

double sample_bilinear(const ScalarGrid& grid, double u, double v, Vec2* jacobian) {
  const Stencil s = make_stencil(grid, u, v);
  const double* row0 = grid.values().data() + grid.index(s.y0, 0);
  const double* row1 = grid.values().data() + grid.index(s.y1, 0);
  const double v00 = row0[s.x0];
  const double v01 = row0[s.x1];
  const double v10 = row1[s.x0];
  const double v11 = row1[s.x1];
  if (jacobian) {
    (*jacobian)[0] = (1.0 - s.fy) * (v01 - v00) + s.fy * (v11 - v10);
    (*jacobian)[1] = (1.0 - s.fx) * (v10 - v00) + s.fx * (v11 - v01);
  }
  return (1.0 - s.fy) * ((1.0 - s.fx) * v00 + s.fx * v01) + s.fy * ((1.0 - s.fx) * v10 + s.fx * v11);
}

void scatter_bilinear(double u, double v, double g, ScalarGrid& grad_grid) {
  const Stencil s = make_stencil(grad_grid, u, v);
  grad_grid(s.y0, s.x0) += g * (1.0 - s.fy) * (1.0 - s.fx);
  grad_grid(s.y0, s.x1) += g * (1.0 - s.fy) * s.fx;
  grad_grid(s.y1, s.x0) += g * s.fy * (1.0 - s.fx);
  grad_grid(s.y1, s.x1) += g * s.fy * s.fx;
}

SampleResult bilinear_sample(const ScalarGrid& source, const WarpField& warp, bool with_jacobian) {
  if (warp.coords.size() != static_cast<std::size_t>(warp.height) * warp.width) {
    throw Error(ErrorCode::InvalidArgument, "warp field is inconsistent");
  }
  SampleResult out;
  out.values = ScalarGrid(warp.height, warp.width, 0.0);
  out.valid = warp.valid;
  if (with_jacobian) {
    out.jacobian_wrt_coords.assign(warp.coords.size(), Vec2::Zero());
    for (std::size_t i = 0; i < warp.coords.size(); ++i) {
      if (!warp.valid[i]) continue;
      out.values[i] = sample_bilinear(source, warp.coords[i].u, warp.coords[i].v, &out.jacobian_wrt_coords[i]);
    }
    return out;
  }
  // Valid coordinates lie inside the grid up to the slack, so truncation is the floor.
  const int w = source.width();
  const int h = source.height();
  const double* g = source.values().data();
  for (std::size_t i = 0; i < warp.coords.size(); ++i) {
    if (!warp.valid[i]) continue;
    const double u = warp.coords[i].u;
    const double v = warp.coords[i].v;
    const int x0 = static_cast<int>(u);
    const int y0 = static_cast<int>(v);
    const double fx = u - x0;
    const double fy = v - y0;
    const std::ptrdiff_t dx = x0 + 1 < w ? 1 : 0;
    const std::ptrdiff_t dy = y0 + 1 < h ? w : 0;
    const double* p = g + static_cast<std::ptrdiff_t>(y0) * w + x0;
    out.values[i] = (1.0 - fy) * ((1.0 - fx) * p[0] + fx * p[dx]) + fy * ((1.0 - fx) * p[dy] + fx * p[dy + dx]);
  }
  return out;
}

SynthesizedView synthesize_view(const Image& source, const ScalarGrid& depth_t, const Pose& pose,
                                const Intrinsics& k_t, const Intrinsics& k_s) {
  SynthesizedView view;
  view.warp = compute_warp(depth_t, pose, k_t, k_s);
  view.channels.reserve(source.size());
  for (const ScalarGrid& channel : source) view.channels.push_back(bilinear_sample(channel, view.warp));
  return view;
}

void accumulate_coord_gradient(const SampleResult& sample, const ScalarGrid& grad_values,
                               std::span<Vec2> grad_coords) {
  for (std::size_t i = 0; i < grad_coords.size(); ++i) {
    if (!sample.valid[i] || grad_values[i] == 0.0) continue;
    grad_coords[i] += grad_values[i] * sample.jacobian_wrt_coords[i];
  }
}

void accumulate_source_gradient(const WarpField& warp, const ScalarGrid& grad_values, ScalarGrid& grad_source) {
  for (std::size_t i = 0; i < warp.coords.size(); ++i) {
    if (!warp.valid[i] || grad_values[i] == 0.0) continue;
    scatter_bilinear(warp.coords[i].u, warp.coords[i].v, grad_values[i], grad_source);
  }
}

void accumulate_warp_gradient(const WarpField& warp, std::span<const Vec2> grad_coords, ScalarGrid& grad_depth,
                              PoseGradient& grad_pose) {
  const Mat3& r = warp.pose.rotation;
  Mat3 outer = Mat3::Zero();
  Vec3 g_t = Vec3::Zero();
  for (std::size_t i = 0; i < grad_coords.size(); ++i) {
    if (!warp.valid[i]) continue;
    const Vec2& g = grad_coords[i];
    if (g[0] == 0.0 && g[1] == 0.0) continue;
    const Vec3 g_y = warp.projection_jacobian[i].transpose() * g;  // dL/d(R X + t)
    grad_depth[i] += g_y.dot(r * warp.rays[i]);
    outer += g_y * warp.target_points[i].transpose();
    g_t += g_y;
  }
  grad_pose.rotation += outer;
  grad_pose.translation += g_t;
}

}  // namespace geoconsist
