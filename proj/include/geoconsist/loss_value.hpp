#pragma once

#include <vector>

#include "geoconsist/core_geometry.hpp"

namespace geoconsist {

/// A scalar loss with its gradient w.r.t. the target depth map and the
/// PoseParams of each source view that took part.
struct LossValue {
  double value = 0.0;
  ScalarGrid grad_depth;
  std::vector<Vec6> grad_pose;
  /// Matches that landed behind the camera and were replaced by the fixed penalty.
  int penalized_matches = 0;
};

}  // namespace geoconsist
