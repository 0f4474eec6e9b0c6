#pragma once

#include <span>
#include <vector>

#include "geoconsist/core_geometry.hpp"

namespace geoconsist {

/// Camera-to-world poses indexed by frame number.
struct Trajectory {
  std::vector<Pose> poses;

  void validate() const;
};

/// Poses relative to the snippet's first frame: poses[i] maps camera-i
/// coordinates into camera-0 coordinates, so poses[0] is the identity.
struct Snippet {
  std::vector<Pose> poses;

  /// Throws InvalidArgument when empty or when the first pose is not the
  /// identity within 1e-12.
  void validate() const;
};

/// Snippet covering frames [first, first + length) of a trajectory.
Snippet slice_snippet(const Trajectory& traj, std::size_t first, std::size_t length);

/// Chains N-frame snippets that each start one frame after the previous one
/// (N - 1 frames of overlap). Frame 0 is the origin. Each new snippet is
/// anchored at its first frame, rescaled to the chain by least squares over
/// the overlapping relative translations, and every overlapping frame is
/// averaged (arithmetic mean of positions, normalized mean of
/// sign-aligned quaternions). Throws OverlapMismatch for snippets of
/// different or too short length.
Trajectory chain_snippets(std::span<const Snippet> snippets);

struct Similarity {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return scale * rotation * x + translation; }
};

/// Least-squares similarity mapping source points onto target points with
/// the determinant correction against reflections. Throws LengthMismatch,
/// DegenerateConfiguration (fewer than 3 points or collinear points).
Similarity umeyama_align(std::span<const Vec3> source, std::span<const Vec3> target);
Similarity umeyama_align(const Trajectory& est, const Trajectory& gt);

/// Optimal scalar scale on the estimated translations, then RMSE over the
/// N positions. Throws LengthMismatch.
double snippet_ate(const Snippet& est, const Snippet& gt);

/// Full-trajectory similarity alignment, then the median per-frame position
/// error. Throws LengthMismatch, DegenerateConfiguration.
double median_ape(const Trajectory& est, const Trajectory& gt);

struct AteSummary {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
};

/// snippet_ate over every window of `length` frames of two trajectories.
AteSummary sequence_ate(const Trajectory& est, const Trajectory& gt, std::size_t length = 3);

}  // namespace geoconsist
