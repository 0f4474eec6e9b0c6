#pragma once

// Shared between the standalone multi-view loss and the total objective,
// which already holds the target->source warps.

#include <array>

#include "geoconsist/core_geometry.hpp"
#include "geoconsist/photometric_losses.hpp"
#include "geoconsist/view_synthesis.hpp"

namespace geoconsist::detail {

struct TargetWarp {
  const WarpField* warp = nullptr;          // target (view 2) -> source
  const SampleResult* synth_depth = nullptr;  // source depth sampled through warp
};

struct MultiviewAccumulator {
  std::array<ScalarGrid, 3>* grad_depths = nullptr;
  PoseGradient* grad_2to1 = nullptr;
  PoseGradient* grad_2to3 = nullptr;
};

/// Returns the loss value. When `acc` is non-null, gradients are scaled by
/// `weight` and added into it.
double multiview_term(const std::array<Image, 3>& frames, const std::array<ScalarGrid, 3>& depths,
                      const Pose& pose_2to1, const Pose& pose_2to3, const Intrinsics& k, double alpha,
                      const SsimConfig& cfg, const TargetWarp& to1, const TargetWarp& to3, double weight,
                      MultiviewAccumulator* acc, int& empty_directions);

/// Adds dL/d(target depth), dL/d(source depth) and the pose gradient of a
/// sampled map given dL/d(sampled values).
void backprop_sampled_map(const WarpField& warp, const SampleResult& sample, const ScalarGrid& grad_values,
                          ScalarGrid* grad_target_depth, ScalarGrid* grad_source, PoseGradient* grad_pose);

}  // namespace geoconsist::detail
