#pragma once

#include <span>

#include "geoconsist/core_geometry.hpp"

namespace geoconsist {

/// Percentiles in (0, 100) for the error-suppression and gradient masks.
struct MaskConfig {
  double error_percentile = 90.0;
  double gradient_percentile = 90.0;

  void validate() const;
};

/// Nearest-rank percentile: the value at 1-based rank ceil(q/100 * n) of the
/// ascending sort. Throws EmptyMask for an empty input.
double nearest_rank_percentile(std::span<const double> values, double q);

/// Keeps valid pixels whose error is <= the error percentile among valid pixels.
BinaryGrid error_mask(const ScalarGrid& error_map, const BinaryGrid& valid, const MaskConfig& cfg = {});

/// Per-pixel image gradient magnitude sqrt(gx^2 + gy^2) from forward
/// differences (zero on the last row/column), averaged over channels.
ScalarGrid gradient_magnitude(const Image& image);

/// Keeps valid pixels whose gradient magnitude is strictly above the
/// gradient percentile among valid pixels.
BinaryGrid gradient_mask(const Image& image, const BinaryGrid& valid, const MaskConfig& cfg = {});

/// Element-wise AND.
BinaryGrid composite_mask(const BinaryGrid& error_m, const BinaryGrid& gradient_m);

}  // namespace geoconsist
