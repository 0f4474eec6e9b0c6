#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "geoconsist/core_geometry.hpp"
#include "geoconsist/photometric_losses.hpp"
#include "geoconsist/pixel_masking.hpp"
#include "geoconsist/sparse_geometry.hpp"

namespace geoconsist {

struct LossWeights {
  double alpha = 0.15;   // pixel vs SSIM mix; also used inside the multi-view term
  double beta = 0.1;     // smoothness
  double gamma1 = 0.001; // epipolar
  double gamma2 = 0.001; // re-projection
  double mu1 = 0.1;      // depth consistency
  double mu2 = 0.1;      // multi-view consistency

  /// Throws InvalidArgument unless all weights are >= 0 and alpha <= 1.
  void validate() const;
};

/// Masking phase: `Train` uses the warp validity mask only; `Refine` also
/// applies the composite error/gradient mask to the pairwise photometric terms.
enum class MaskPhase { Train, Refine };

/// Three-frame snippet around target view 2 (index 1). Index 0 of `poses`
/// and `matches` refers to the pair 2->1, index 1 to 2->3. Matches store the
/// target-view pixel in `p` and the source-view pixel in `p_prime`.
struct SnippetInput {
  std::array<Image, 3> images;
  std::array<ScalarGrid, 3> depths;
  std::array<PoseParams, 2> poses;
  std::array<MatchSet, 2> matches;
  Intrinsics intrinsics;
  MaskPhase phase = MaskPhase::Train;

  MaskConfig mask;
  SsimConfig ssim;
  EpipolarOptions epipolar;
  ReprojectionOptions reprojection;

  /// Shapes agree, images are non-empty with equal channel counts, depths
  /// are positive. Throws InvalidArgument or NonPositiveDepth.
  void validate() const;
};

struct TermValues {
  double pixel = 0.0;
  double ssim = 0.0;
  double smooth = 0.0;
  double epi = 0.0;
  double reproj = 0.0;
  double depth = 0.0;
  double multi = 0.0;
};

/// Weighted sum in the fixed order pixel, ssim, smooth, epi, reproj, depth, multi.
double weighted_total(const TermValues& t, const LossWeights& w);

/// A term contribution that was replaced by 0. `source` is 0 or 1 for
/// pairwise terms and -1 otherwise.
struct DegradedTerm {
  std::string term;
  int source = -1;
  ErrorCode reason = ErrorCode::EmptyMask;
};

struct LossReport {
  TermValues terms;
  double total = 0.0;
  std::array<ScalarGrid, 3> grad_depths;
  std::array<Vec6, 2> grad_poses{Vec6::Zero(), Vec6::Zero()};
  std::vector<DegradedTerm> degraded;
  int penalized_matches = 0;
};

/// Bit flags selecting terms for EvalOptions::terms.
enum TermBit : unsigned {
  kTermPixel = 1u << 0,
  kTermSsim = 1u << 1,
  kTermSmooth = 1u << 2,
  kTermEpi = 1u << 3,
  kTermReproj = 1u << 4,
  kTermDepth = 1u << 5,
  kTermMulti = 1u << 6,
  kAllTerms = (1u << 7) - 1,
};

struct EvalOptions {
  bool gradients = true;
  /// Skip terms whose weight is zero; their reported value is then 0.
  bool skip_zero_weight_terms = false;
  /// Terms left out of this mask are not evaluated and contribute 0.
  unsigned terms = kAllTerms;
};

/// Full objective over the snippet. Pairwise terms are summed over both
/// source views. Terms whose component reports EmptyMask, ZeroSynthMean,
/// EmptyMatchSet or DegenerateTranslation contribute 0 and are listed in
/// `degraded`.
LossReport total_loss(const SnippetInput& input, const LossWeights& w = {}, const EvalOptions& opts = {});

// ---------------------------------------------------------------------------
// Parameter vector layout used by the checker and the optimizer:
// depths[0], depths[1], depths[2] (row-major), then poses[0], poses[1].

std::vector<double> pack_parameters(const SnippetInput& input);
void unpack_parameters(std::span<const double> params, SnippetInput& input);
std::vector<double> pack_gradient(const LossReport& report);

enum class FdStencil {
  TwoPoint,   // (f(x+h) - f(x-h)) / 2h
  FourPoint,  // (8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h
};

struct GradientCheckOptions {
  double h = 1e-6;           // step, scaled by max(1, |x_i|)
  double tolerance = 1e-4;   // on the max relative error
  double floor = 1e-8;       // denominator floor for near-zero entries
  /// Optional per-coordinate relative steps overriding `h`.
  std::vector<double> steps;
  FdStencil stencil = FdStencil::TwoPoint;
};

struct GradientCheckReport {
  std::size_t coordinates = 0;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences per coordinate; relative error per coordinate is
/// |a - n| / max(|a|, |n|, floor). If `indices` is empty, every coordinate
/// is checked. Throws NonFiniteEvaluation, InvalidArgument.
GradientCheckReport gradient_check(const ScalarFunction& f, std::span<const double> point,
                                   std::span<const double> analytic, const GradientCheckOptions& opts = {},
                                   std::span<const std::size_t> indices = {});

/// Central-difference estimate of df/dx_i with absolute step `step`.
double central_difference(const ScalarFunction& f, std::span<double> x, std::size_t i, double step,
                          FdStencil stencil);

struct ObjectiveCheckOptions {
  double depth_step = 1e-4;  // relative step for depth pixels
  double pose_step = 1e-6;   // relative step for pose parameters
  double tolerance = 1e-4;
  double floor = 1e-8;
  FdStencil stencil = FdStencil::FourPoint;
};

/// Per-term results in the order pixel, ssim, smooth, epi, reproj, depth,
/// multi, followed by the weighted total.
struct ObjectiveCheckReport {
  std::vector<std::string> names;
  std::vector<GradientCheckReport> reports;
  bool passed = false;
};

/// Names of the seven terms followed by "total".
const std::vector<std::string>& objective_term_names();

/// Checks the analytic gradient of every unweighted term and of the weighted
/// total against central differences, for every depth pixel of the three
/// views and both pose vectors. One sweep evaluates all terms at each
/// perturbed point. Terms whose weight is zero are skipped (reported with
/// zero coordinates and passed). A term that does not read the side-view
/// depths is differenced there only if a random perturbation of those depths
/// changes its value; otherwise its numeric derivative there is exactly 0.
ObjectiveCheckReport check_objective_gradients(const SnippetInput& input, const LossWeights& w,
                                               const ObjectiveCheckOptions& opts = {});

/// Distances from the kinks of the piecewise-smooth objective, sized for the
/// default finite-difference steps.
struct KinkMargins {
  double lattice = 1e-3;      // warped coordinate to the nearest integer, pixels
  double photometric = 1e-4;  // |synthesized - target| intensity
  double depth = 2e-3;        // depth residual, relative to the depth
  double smooth = 5e-4;       // neighbour difference of the mean-normalized depth
  double epipolar = 1e-4;     // signed epipolar distance of a match, calibrated units
  double nudge = 4e-3;        // largest relative depth change per round
};

/// Moves depth values slightly until no warped coordinate of the four warps
/// used by the objective, and no L1 residual, lies within its margin of a
/// kink, so central differences never straddle one. Matches lying within
/// `epipolar` of their epipolar line get their source pixel pushed off it
/// along the line normal. Gives up after 50 rounds. Deterministic given `seed`.
SnippetInput nudge_off_kinks(const SnippetInput& input, const KinkMargins& margins = {}, std::uint64_t seed = 1);

/// Seeded perturbation of a snippet. Depths are multiplied by
/// 1 + depth_sigma * N(0, 1) (floored at 10% of the value), pose rotation
/// vectors and translations get additive N(0, sigma^2) noise per component,
/// and each translation additionally moves by translation_fraction * |t| in
/// a uniformly random direction.
struct PerturbOptions {
  double depth_sigma = 0.0;
  double rotation_sigma = 0.0;
  double translation_sigma = 0.0;
  double translation_fraction = 0.0;
};

SnippetInput perturb_snippet(const SnippetInput& input, const PerturbOptions& opts, std::uint64_t seed);

/// Sum over both poses of |t_a - t_b|.
double translation_error(const SnippetInput& a, const SnippetInput& b);

struct RefineOptions {
  int steps = 200;
  double learning_rate = 1e-4;
  bool optimize_depth = true;
  bool optimize_pose = true;
};

struct RefineResult {
  SnippetInput final_state;
  std::vector<TermValues> term_history;  // one entry per evaluation, steps + 1 in total
  std::vector<double> total_history;
};

/// Plain gradient descent on depths and pose parameters. Throws
/// InvalidArgument for steps < 1 or lr < 0, DivergenceDetected when the total
/// exceeds 10x its initial value, NonPositiveDepth if a step drives a depth
/// to zero or below.
RefineResult gradient_descent_refine(const SnippetInput& input, const LossWeights& w, const RefineOptions& opts);

}  // namespace geoconsist
