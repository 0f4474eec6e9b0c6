#pragma once

#include <array>

#include "geoconsist/core_geometry.hpp"
#include "geoconsist/loss_value.hpp"
#include "geoconsist/photometric_losses.hpp"
#include "geoconsist/view_synthesis.hpp"

namespace geoconsist {

struct NormalizedDepth {
  ScalarGrid depth;
  double applied_scale = 1.0;  // 1 / mean(input)
};

/// depth / mean(depth). Throws NonPositiveDepth.
NormalizedDepth mean_normalize(const ScalarGrid& depth);

/// dL/d(depth) for L evaluated on mean_normalize(depth).
ScalarGrid mean_normalize_backward(const ScalarGrid& depth, const ScalarGrid& grad_normalized);

/// mean(target on mask) / mean(synth on mask).
/// Throws EmptyMask, or ZeroSynthMean when either masked mean is not positive.
double aligned_scale_ratio(const ScalarGrid& target_depth, const ScalarGrid& synth_depth, const BinaryGrid& mask);
double aligned_scale_ratio(const ScalarGrid& target_depth, const SampleResult& synth_depth, const BinaryGrid& mask);

/// Scale-aligned depth discrepancy (1/|M|) sum_M |s * synth - target| with
/// its gradient w.r.t. both maps; s is differentiated through.
struct ConsistencyTerm {
  double value = 0.0;
  double scale = 1.0;
  ScalarGrid grad_target;
  ScalarGrid grad_synth;
};

ConsistencyTerm depth_consistency_term(const ScalarGrid& target_depth, const ScalarGrid& synth_depth,
                                       const BinaryGrid& mask);

/// LossValue form of the term: grad_depth is w.r.t. the target map and
/// grad_pose is empty (the synthesized map is taken as given).
LossValue depth_consistency_loss(const ScalarGrid& target_depth, const SampleResult& synth_depth,
                                 const BinaryGrid& mask);

/// Full pairwise chain: warps the source depth into the target frame, then
/// applies the scale-aligned discrepancy. Gradients reach the target depth
/// (through the term and the warp), the source depth (through the bilinear
/// weights) and the pose.
struct PairConsistency {
  double value = 0.0;
  ScalarGrid grad_target_depth;
  ScalarGrid grad_source_depth;
  Vec6 grad_pose = Vec6::Zero();
};

PairConsistency pairwise_depth_consistency(const ScalarGrid& target_depth, const ScalarGrid& source_depth,
                                           const PoseParams& pose_t_to_s, const Intrinsics& k_t,
                                           const Intrinsics& k_s);

/// Chained transform from view 1 to view 3 given the two target-relative
/// poses: T_13 = T_23 * T_21^-1 (points in view 1 coordinates to view 3).
Pose chain_pose(const Pose& pose_2to1, const Pose& pose_2to3);

struct MultiviewLoss {
  double value = 0.0;
  std::array<ScalarGrid, 3> grad_depths;
  std::array<Vec6, 2> grad_poses{Vec6::Zero(), Vec6::Zero()};  // (2->1, 2->3)
  int empty_directions = 0;  // directions skipped because their mask was empty
};

/// Three-view consistency through the chained pose. Views 1 and 3 are scaled
/// into the target's depth scale, then each is warped into the other
/// (1->3 and 3->1) and the photometric plus depth discrepancy is averaged
/// over both directions.
MultiviewLoss multiview_loss(const std::array<Image, 3>& frames, const std::array<ScalarGrid, 3>& depths,
                             const PoseParams& pose_2to1, const PoseParams& pose_2to3, const Intrinsics& k,
                             double alpha, const SsimConfig& cfg = {});

}  // namespace geoconsist
