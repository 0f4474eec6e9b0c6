#pragma once

#include <span>

#include "geoconsist/core_geometry.hpp"
#include "geoconsist/loss_value.hpp"

namespace geoconsist {

/// Stabilizing constants assume intensities in [0, 1].
struct SsimConfig {
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
  int patch = 3;

  void validate() const;
};

/// Loss value plus d(loss)/d(synthesized channel) for every channel. The
/// gradient is left empty when a loss is called with `with_gradient` false.
struct ImageLoss {
  double value = 0.0;
  Image grad_synthesized;
};

/// Mean absolute difference over masked pixels and channels.
/// Throws EmptyMask when the mask selects nothing.
ImageLoss pixel_loss(const Image& target, const Image& synthesized, const BinaryGrid& mask,
                     bool with_gradient = true);

/// SSIM index of two equally sized patches given as flat spans (box weighting).
double ssim_index(std::span<const double> x, std::span<const double> y, const SsimConfig& cfg = {});

/// (1 - mean SSIM) / 2 over all patch positions (stride 1) whose pixels all
/// lie inside the mask. Uses the standard SSIM denominator
/// (mu_x^2 + mu_y^2 + c1)(sigma_x^2 + sigma_y^2 + c2).
ImageLoss ssim_loss(const Image& target, const Image& synthesized, const BinaryGrid& mask,
                    const SsimConfig& cfg = {}, bool with_gradient = true);

struct DepthLoss {
  double value = 0.0;
  ScalarGrid grad_depth;
};

/// Edge-aware first-order smoothness. Forward differences; each direction
/// is averaged over the positions where its difference exists, and
/// weighted by exp(-mean over channels of |image difference|).
DepthLoss smoothness_loss(const ScalarGrid& depth, const Image& target_image, bool with_gradient = true);

struct SourceView {
  Image image;
  PoseParams pose;  // target -> source
  Intrinsics intrinsics;
};

/// alpha * L_pixel + (1 - alpha) * L_ssim + beta * L_smooth, with the pairwise
/// terms summed over the source views and the smoothness taken on the
/// mean-normalized target depth.
LossValue baseline_loss(const Image& target, const ScalarGrid& depth_t, const Intrinsics& k_t,
                        std::span<const SourceView> sources, double alpha, double beta,
                        const SsimConfig& cfg = {});

}  // namespace geoconsist
