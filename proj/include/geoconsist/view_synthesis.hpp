#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "geoconsist/core_geometry.hpp"

namespace geoconsist {

using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Per-target-pixel source coordinates produced by inverse warping, the
/// validity mask, and the intermediate quantities needed to differentiate
/// the coordinates w.r.t. the target depth and the pose.
struct WarpField {
  int height = 0;
  int width = 0;
  std::vector<PixelCoord> coords;
  BinaryGrid valid;

  Pose pose;                         // target -> source transform used
  std::vector<Vec3> rays;            // K_t^-1 (u, v, 1)
  std::vector<Vec3> target_points;   // D_t(p) * ray
  std::vector<Mat23> projection_jacobian;  // d coords / d (R X + t)
};

/// Target-to-source inverse warp p_s ~ K_s [R|t] D_t(p_t) K_t^-1 p_t.
/// A pixel is valid iff the transformed depth exceeds 1e-9 and the source
/// coordinate lies in [0, W-1] x [0, H-1] (1e-9 rounding slack). Throws NonPositiveDepth.
/// Without `with_jacobians` only coords and valid are filled; such a field
/// cannot be passed to the backward passes.
WarpField compute_warp(const ScalarGrid& depth_t, const Pose& pose_t_to_s, const Intrinsics& k_t,
                       const Intrinsics& k_s, bool with_jacobians = true);

struct SampleResult {
  ScalarGrid values;
  BinaryGrid valid;
  std::vector<Vec2> jacobian_wrt_coords;  // (d value/du, d value/dv)
};

/// Bilinear interpolation of `grid` at a real coordinate. Indices are
/// clamped at the border; `jacobian` (optional) receives the exact
/// derivative of the interpolant inside the current lattice cell.
double sample_bilinear(const ScalarGrid& grid, double u, double v, Vec2* jacobian = nullptr);

/// Adds g * d(sample_bilinear(grid, u, v))/d(grid) into grad_grid.
void scatter_bilinear(double u, double v, double g, ScalarGrid& grad_grid);

SampleResult bilinear_sample(const ScalarGrid& source, const WarpField& warp, bool with_jacobian = true);

struct SynthesizedView {
  std::vector<SampleResult> channels;
  WarpField warp;
};

SynthesizedView synthesize_view(const Image& source, const ScalarGrid& depth_t, const Pose& pose_t_to_s,
                                 const Intrinsics& k_t, const Intrinsics& k_s);

// ---------------------------------------------------------------------------
// Backward passes.

/// grad_coords[p] += grad_values[p] * jacobian[p] for valid pixels.
void accumulate_coord_gradient(const SampleResult& sample, const ScalarGrid& grad_values,
                               std::span<Vec2> grad_coords);

/// Scatters dL/d(sampled values) into dL/d(source grid) via the bilinear weights.
void accumulate_source_gradient(const WarpField& warp, const ScalarGrid& grad_values,
                                ScalarGrid& grad_source);

/// Chains dL/d(coords) into dL/d(target depth) and the matrix-form pose gradient.
void accumulate_warp_gradient(const WarpField& warp, std::span<const Vec2> grad_coords,
                              ScalarGrid& grad_depth, PoseGradient& grad_pose);

}  // namespace geoconsist
