#pragma once

#include <vector>

#include "geoconsist/core_geometry.hpp"
#include "geoconsist/loss_value.hpp"

namespace geoconsist {

/// Pixel correspondence: p in the target view, p_prime in the source view.
struct Match {
  PixelCoord p;
  PixelCoord p_prime;
};

using MatchSet = std::vector<Match>;

struct EssentialMatrix {
  Mat3 e = Mat3::Zero();
};

/// E = [t]_x R. Throws DegenerateTranslation when |t| <= 1e-12.
EssentialMatrix essential_from_pose(const Pose& pose);

enum class EpipolarResidual { Absolute, Signed };

struct EpipolarOptions {
  EpipolarResidual residual = EpipolarResidual::Absolute;
  double epsilon = 1e-12;  // added under each square root
};

/// Point-to-line distances in calibrated coordinates for one match:
/// (distance of p' to E p, distance of p to E^T p'), signed.
std::pair<double, double> symmetric_epipolar_distances(const Mat3& e, const Vec3& p, const Vec3& p_prime,
                                                       double epsilon = 1e-12);

/// Sum over matches of the symmetric epipolar distance. The depth gradient
/// is left empty; grad_pose has one entry.
/// Throws EmptyMatchSet, DegenerateTranslation.
LossValue epipolar_loss(const MatchSet& matches, const Pose& pose, const Intrinsics& k_t, const Intrinsics& k_s,
                        const EpipolarOptions& opts = {});

struct ReprojectionOptions {
  double behind_camera_penalty = 100.0;  // pixels, zero gradient
};

/// Sum over matches of || pi(K_s (R D(p) K_t^-1 p + t)) - p' ||_2 with D(p)
/// bilinearly sampled from the target depth.
LossValue reprojection_loss(const MatchSet& matches, const Pose& pose, const ScalarGrid& depth_t,
                            const Intrinsics& k_t, const Intrinsics& k_s, const ReprojectionOptions& opts = {});

namespace detail {

/// Matrix-form variants used by the objective.
double epipolar_accumulate(const MatchSet& matches, const Pose& pose, const Intrinsics& k_t, const Intrinsics& k_s,
                           const EpipolarOptions& opts, double weight, PoseGradient* grad);

double reprojection_accumulate(const MatchSet& matches, const Pose& pose, const ScalarGrid& depth_t,
                               const Intrinsics& k_t, const Intrinsics& k_s, const ReprojectionOptions& opts,
                               double weight, ScalarGrid* grad_depth, PoseGradient* grad_pose, int* penalized);

}  // namespace detail

}  // namespace geoconsist
