#include "geoconsist/objective.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "geoconsist/depth_consistency.hpp"
#include "geoconsist/view_synthesis.hpp"
#include "multiview_detail.hpp"

namespace geoconsist {

void LossWeights::validate() const {
  for (double v : {alpha, beta, gamma1, gamma2, mu1, mu2}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "loss weights must be >= 0");
  }
  if (alpha > 1.0) throw Error(ErrorCode::InvalidArgument, "alpha must not exceed 1");
}

void SnippetInput::validate() const {
  const ScalarGrid& ref = depths[1];
  if (ref.empty()) throw Error(ErrorCode::InvalidArgument, "snippet has an empty target depth");
  for (int i = 0; i < 3; ++i) {
    if (!depths[i].same_shape(ref)) throw Error(ErrorCode::InvalidArgument, "depth maps differ in size");
    if (images[i].empty() || images[i].size() != images[1].size()) {
      throw Error(ErrorCode::InvalidArgument, "frames must have the same non-zero channel count");
    }
    for (const ScalarGrid& ch : images[i]) {
      if (!ch.same_shape(ref)) throw Error(ErrorCode::InvalidArgument, "image and depth sizes differ");
    }
    for (double d : depths[i].values()) {
      if (!(d > 0.0) || !std::isfinite(d)) throw Error(ErrorCode::NonPositiveDepth, "snippet depth must be positive");
    }
  }
  mask.validate();
  ssim.validate();
}

double weighted_total(const TermValues& t, const LossWeights& w) {
  double total = w.alpha * t.pixel;
  total += (1.0 - w.alpha) * t.ssim;
  total += w.beta * t.smooth;
  total += w.gamma1 * t.epi;
  total += w.gamma2 * t.reproj;
  total += w.mu1 * t.depth;
  total += w.mu2 * t.multi;
  return total;
}

namespace {

bool degradable(ErrorCode c) {
  return c == ErrorCode::EmptyMask || c == ErrorCode::ZeroSynthMean || c == ErrorCode::EmptyMatchSet ||
         c == ErrorCode::DegenerateTranslation;
}

template <class F>
bool guarded(LossReport& report, const char* term, int source, F&& f) {
  try {
    f();
    return true;
  } catch (const Error& e) {
    if (!degradable(e.code())) throw;
    report.degraded.push_back({term, source, e.code()});
    return false;
  }
}

BinaryGrid refine_mask(const Image& target, const Image& synth, const BinaryGrid& valid, const MaskConfig& cfg) {
  ScalarGrid err(valid.height(), valid.width(), 0.0);
  for (std::size_t c = 0; c < target.size(); ++c) {
    for (std::size_t i = 0; i < err.size(); ++i) err[i] += std::abs(synth[c][i] - target[c][i]);
  }
  for (double& v : err.values()) v /= static_cast<double>(target.size());
  return composite_mask(error_mask(err, valid, cfg), gradient_mask(target, valid, cfg));
}

}  // namespace

LossReport total_loss(const SnippetInput& in, const LossWeights& w, const EvalOptions& opts) {
  w.validate();
  in.validate();
  const bool grads = opts.gradients;
  auto wanted_term = [&](unsigned bit, double weight) {
    return (opts.terms & bit) != 0 && (!opts.skip_zero_weight_terms || weight > 0.0);
  };

  const ScalarGrid& d2 = in.depths[1];
  const Image& target = in.images[1];
  const Intrinsics& k = in.intrinsics;
  const int h = d2.height();
  const int wd = d2.width();

  LossReport r;
  if (grads) {
    for (auto& g : r.grad_depths) g = ScalarGrid(h, wd, 0.0);
  }
  std::array<PoseGradient, 2> pg;
  std::array<Pose, 2> poses{params_to_pose(in.poses[0]), params_to_pose(in.poses[1])};
  std::array<WarpField, 2> warps;
  std::array<SampleResult, 2> synth_depth;

  const bool want_pixel = wanted_term(kTermPixel, w.alpha);
  const bool want_ssim = wanted_term(kTermSsim, 1.0 - w.alpha);
  const bool want_depth = wanted_term(kTermDepth, w.mu1);
  const bool want_multi = wanted_term(kTermMulti, w.mu2);

  const bool need_warps = want_pixel || want_ssim || want_depth || want_multi;

  for (int j = 0; j < 2; ++j) {
    const int src = j == 0 ? 0 : 2;
    if (need_warps) warps[j] = compute_warp(d2, poses[j], k, k, grads);
    const WarpField& warp = warps[j];
    std::vector<Vec2> gc(grads ? warp.coords.size() : 0, Vec2::Zero());

    if (want_pixel || want_ssim) {
      std::vector<SampleResult> channels;
      Image synth;
      for (const ScalarGrid& ch : in.images[src]) {
        channels.push_back(bilinear_sample(ch, warp, grads));
        synth.push_back(channels.back().values);
      }
      BinaryGrid mask = warp.valid;
      bool mask_ok = true;
      if (in.phase == MaskPhase::Refine) {
        mask_ok = guarded(r, "mask", j, [&] { mask = refine_mask(target, synth, warp.valid, in.mask); });
      }
      ImageLoss pl, sl;
      bool have_pixel = false, have_ssim = false;
      if (mask_ok && want_pixel) {
        have_pixel = guarded(r, "pixel", j, [&] { pl = pixel_loss(target, synth, mask, grads); });
        if (have_pixel) r.terms.pixel += pl.value;
      }
      if (mask_ok && want_ssim) {
        have_ssim = guarded(r, "ssim", j, [&] { sl = ssim_loss(target, synth, mask, in.ssim, grads); });
        if (have_ssim) r.terms.ssim += sl.value;
      }
      if (grads && (have_pixel || have_ssim)) {
        for (std::size_t c = 0; c < synth.size(); ++c) {
          ScalarGrid g(h, wd, 0.0);
          for (std::size_t i = 0; i < g.size(); ++i) {
            double v = 0.0;
            if (have_pixel) v += w.alpha * pl.grad_synthesized[c][i];
            if (have_ssim) v += (1.0 - w.alpha) * sl.grad_synthesized[c][i];
            g[i] = v;
          }
          accumulate_coord_gradient(channels[c], g, gc);
        }
      }
    }

    if (want_depth || want_multi) synth_depth[j] = bilinear_sample(in.depths[src], warp, grads);
    if (want_depth) {
      ConsistencyTerm term;
      if (guarded(r, "depth", j, [&] { term = depth_consistency_term(d2, synth_depth[j].values, warp.valid); })) {
        r.terms.depth += term.value;
        if (grads) {
          ScalarGrid g_synth(h, wd, 0.0);
          for (std::size_t i = 0; i < g_synth.size(); ++i) {
            g_synth[i] = w.mu1 * term.grad_synth[i];
            r.grad_depths[1][i] += w.mu1 * term.grad_target[i];
          }
          accumulate_coord_gradient(synth_depth[j], g_synth, gc);
          accumulate_source_gradient(warp, g_synth, r.grad_depths[src]);
        }
      }
    }
    if (grads && need_warps) accumulate_warp_gradient(warp, gc, r.grad_depths[1], pg[j]);

    if (wanted_term(kTermEpi, w.gamma1)) {
      guarded(r, "epi", j, [&] {
        r.terms.epi += detail::epipolar_accumulate(in.matches[j], poses[j], k, k, in.epipolar, w.gamma1,
                                                   grads ? &pg[j] : nullptr);
      });
    }
    if (wanted_term(kTermReproj, w.gamma2)) {
      guarded(r, "reproj", j, [&] {
        r.terms.reproj += detail::reprojection_accumulate(in.matches[j], poses[j], d2, k, k, in.reprojection,
                                                          w.gamma2, grads ? &r.grad_depths[1] : nullptr,
                                                          grads ? &pg[j] : nullptr, &r.penalized_matches);
      });
    }
  }

  if (wanted_term(kTermSmooth, w.beta)) {
    const NormalizedDepth nd = mean_normalize(d2);
    const DepthLoss sm = smoothness_loss(nd.depth, target, grads && w.beta > 0.0);
    r.terms.smooth = sm.value;
    if (grads && w.beta > 0.0) {
      const ScalarGrid g = mean_normalize_backward(d2, sm.grad_depth);
      for (std::size_t i = 0; i < g.size(); ++i) r.grad_depths[1][i] += w.beta * g[i];
    }
  }

  if (want_multi) {
    int empty = 0;
    detail::MultiviewAccumulator acc{&r.grad_depths, &pg[0], &pg[1]};
    r.terms.multi = detail::multiview_term(in.images, in.depths, poses[0], poses[1], k, w.alpha, in.ssim,
                                           {&warps[0], &synth_depth[0]}, {&warps[1], &synth_depth[1]}, w.mu2,
                                           grads ? &acc : nullptr, empty);
    if (empty > 0) r.degraded.push_back({"multi", -1, ErrorCode::EmptyMask});
  }

  r.total = weighted_total(r.terms, w);
  if (grads) {
    for (int j = 0; j < 2; ++j) r.grad_poses[j] = to_param_gradient(pg[j], in.poses[j]);
  }
  return r;
}

std::vector<double> pack_parameters(const SnippetInput& in) {
  std::vector<double> out;
  for (const ScalarGrid& d : in.depths) out.insert(out.end(), d.values().begin(), d.values().end());
  for (const PoseParams& p : in.poses) {
    const Vec6 v = p.to_vector();
    out.insert(out.end(), v.data(), v.data() + 6);
  }
  return out;
}

void unpack_parameters(std::span<const double> params, SnippetInput& in) {
  std::size_t need = 12;
  for (const ScalarGrid& d : in.depths) need += d.size();
  if (params.size() != need) throw Error(ErrorCode::LengthMismatch, "parameter vector length does not match snippet");
  std::size_t at = 0;
  for (ScalarGrid& d : in.depths) {
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(at), d.size(), d.values().begin());
    at += d.size();
  }
  for (PoseParams& p : in.poses) {
    Vec6 v;
    for (int i = 0; i < 6; ++i) v[i] = params[at + static_cast<std::size_t>(i)];
    p = PoseParams::from_vector(v);
    at += 6;
  }
}

std::vector<double> pack_gradient(const LossReport& r) {
  std::vector<double> out;
  for (const ScalarGrid& d : r.grad_depths) out.insert(out.end(), d.values().begin(), d.values().end());
  for (const Vec6& v : r.grad_poses) out.insert(out.end(), v.data(), v.data() + 6);
  return out;
}

double central_difference(const ScalarFunction& f, std::span<double> x, std::size_t i, double step,
                          FdStencil stencil) {
  const double x0 = x[i];
  auto at = [&](double k) {
    x[i] = x0 + k * step;
    const double v = f(x);
    x[i] = x0;
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFiniteEvaluation, "objective is not finite near coordinate " + std::to_string(i));
    }
    return v;
  };
  const double d1 = at(1.0) - at(-1.0);
  if (stencil == FdStencil::TwoPoint) return d1 / (2.0 * step);
  const double d2 = at(2.0) - at(-2.0);
  return (8.0 * d1 - d2) / (12.0 * step);
}

namespace {

void validate_steps(const GradientCheckOptions& opts, std::size_t n) {
  if (!(opts.h > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  if (!opts.steps.empty() && opts.steps.size() != n) {
    throw Error(ErrorCode::LengthMismatch, "per-coordinate steps and point lengths differ");
  }
  for (double s : opts.steps) {
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite-difference steps must be positive");
  }
}

void record(GradientCheckReport& rep, std::size_t i, double a, double numeric, double floor) {
  const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
  if (rel > rep.max_relative_error || rep.coordinates == 0) {
    rep.max_relative_error = rel;
    rep.worst_index = i;
    rep.worst_analytic = a;
    rep.worst_numeric = numeric;
  }
  ++rep.coordinates;
}

}  // namespace

GradientCheckReport gradient_check(const ScalarFunction& f, std::span<const double> point,
                                   std::span<const double> analytic, const GradientCheckOptions& opts,
                                   std::span<const std::size_t> indices) {
  if (analytic.size() != point.size()) throw Error(ErrorCode::LengthMismatch, "gradient and point lengths differ");
  validate_steps(opts, point.size());

  std::vector<double> x(point.begin(), point.end());
  GradientCheckReport rep;
  auto check = [&](std::size_t i) {
    const double rel_step = opts.steps.empty() ? opts.h : opts.steps[i];
    const double step = rel_step * std::max(1.0, std::abs(x[i]));
    record(rep, i, analytic[i], central_difference(f, x, i, step, opts.stencil), opts.floor);
  };
  if (indices.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) check(i);
  } else {
    for (std::size_t i : indices) {
      if (i >= x.size()) throw Error(ErrorCode::InvalidArgument, "coordinate index out of range");
      check(i);
    }
  }
  rep.passed = rep.max_relative_error < opts.tolerance;
  return rep;
}

const std::vector<std::string>& objective_term_names() {
  static const std::vector<std::string> names{"pixel", "ssim", "smooth", "epi", "reproj", "depth", "multi", "total"};
  return names;
}

namespace {

constexpr std::size_t kTermCount = 7;

std::array<double, kTermCount> term_array(const TermValues& t) {
  return {t.pixel, t.ssim, t.smooth, t.epi, t.reproj, t.depth, t.multi};
}

TermValues term_values(const std::array<double, kTermCount>& a) {
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
}

std::array<double, kTermCount> term_weights(const LossWeights& w) {
  return {w.alpha, 1.0 - w.alpha, w.beta, w.gamma1, w.gamma2, w.mu1, w.mu2};
}

}  // namespace

ObjectiveCheckReport check_objective_gradients(const SnippetInput& input, const LossWeights& w,
                                               const ObjectiveCheckOptions& opts) {
  w.validate();
  input.validate();
  if (!(opts.depth_step > 0.0) || !(opts.pose_step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "finite-difference steps must be positive");
  }
  const auto weights = term_weights(w);

  // Analytic gradients: each term alone, rescaled to unit weight, then the total.
  std::array<std::vector<double>, kTermCount + 1> analytic;
  for (std::size_t t = 0; t < kTermCount; ++t) {
    if (weights[t] == 0.0) continue;
    analytic[t] = pack_gradient(total_loss(input, w, EvalOptions{true, false, 1u << t}));
    for (double& g : analytic[t]) g /= weights[t];
  }
  const LossReport base = total_loss(input, w, EvalOptions{true, false, kAllTerms});
  analytic[kTermCount] = pack_gradient(base);
  const auto base_terms = term_array(base.terms);

  const std::vector<double> x0 = pack_parameters(input);
  const std::size_t pixels = input.depths[1].size();
  const std::size_t pose_begin = x0.size() - 12;

  // Terms that read the side-view depths: depth and multi by construction,
  // plus any other whose value moves when those depths are perturbed.
  unsigned side_terms = kTermDepth | kTermMulti;
  {
    SnippetInput moved = input;
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> u(0.99, 1.01);
    for (int v : {0, 2}) {
      for (double& d : moved.depths[v].values()) d *= u(rng);
    }
    const auto moved_terms = term_array(total_loss(moved, w, EvalOptions{false, false, kAllTerms}).terms);
    for (std::size_t t = 0; t < kTermCount; ++t) {
      if (moved_terms[t] != base_terms[t]) side_terms |= 1u << t;
    }
  }

  ObjectiveCheckReport out;
  out.names = objective_term_names();
  out.reports.assign(kTermCount + 1, GradientCheckReport{});

  SnippetInput scratch = input;
  std::vector<double> x = x0;
  std::array<double, kTermCount> values{};
  unsigned active = kAllTerms;
  const ScalarFunction eval_terms = [&](std::span<const double> p) {
    unpack_parameters(p, scratch);
    const LossReport r = total_loss(scratch, w, EvalOptions{false, false, active});
    values = term_array(r.terms);
    // Terms left out keep their base value, so the total stays the full objective.
    for (std::size_t t = 0; t < kTermCount; ++t) {
      if (!(active & (1u << t))) values[t] = base_terms[t];
    }
    return weighted_total(term_values(values), w);
  };

  // One sweep yields a difference of every term: record the term values at
  // each stencil point through a wrapper.
  std::vector<std::array<double, kTermCount + 1>> samples;
  const ScalarFunction sampled = [&](std::span<const double> p) {
    const double total = eval_terms(p);
    std::array<double, kTermCount + 1> row{};
    std::copy(values.begin(), values.end(), row.begin());
    row[kTermCount] = total;
    samples.push_back(row);
    return total;
  };

  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool is_pose = i >= pose_begin;
    const bool side_view = !is_pose && (i < pixels || i >= 2 * pixels);
    active = side_view ? side_terms : kAllTerms;
    const double rel = is_pose ? opts.pose_step : opts.depth_step;
    const double step = rel * std::max(1.0, std::abs(x[i]));
    samples.clear();
    central_difference(sampled, x, i, step, opts.stencil);

    // samples hold f(x+h), f(x-h)[, f(x+2h), f(x-2h)].
    for (std::size_t t = 0; t <= kTermCount; ++t) {
      if (t < kTermCount && weights[t] == 0.0) continue;
      double numeric = 0.0;
      if (t == kTermCount || (active & (1u << t))) {
        const double d1 = samples[0][t] - samples[1][t];
        numeric = opts.stencil == FdStencil::TwoPoint
                      ? d1 / (2.0 * step)
                      : (8.0 * d1 - (samples[2][t] - samples[3][t])) / (12.0 * step);
      }
      record(out.reports[t], i, analytic[t][i], numeric, opts.floor);
    }
  }

  out.passed = true;
  for (std::size_t t = 0; t <= kTermCount; ++t) {
    GradientCheckReport& rep = out.reports[t];
    rep.passed = rep.max_relative_error < opts.tolerance;
    out.passed = out.passed && rep.passed;
  }
  return out;
}

namespace {

bool near_lattice(double x, double margin) { return std::abs(x - std::round(x)) < margin; }

bool near_lattice(const PixelCoord& p, double margin) {
  return near_lattice(p.u, margin) || near_lattice(p.v, margin);
}

double masked_ratio(const ScalarGrid& num, const ScalarGrid& den, const BinaryGrid& mask) {
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    if (!mask[i]) continue;
    a += num[i];
    b += den[i];
  }
  return b > 0.0 ? a / b : 1.0;
}

ScalarGrid scaled_grid(const ScalarGrid& g, double s) {
  ScalarGrid out = g;
  for (double& v : out.values()) v *= s;
  return out;
}

}  // namespace

SnippetInput nudge_off_kinks(const SnippetInput& input, const KinkMargins& margins, std::uint64_t seed) {
  input.validate();
  SnippetInput out = input;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amount(0.5, 1.0);
  const Intrinsics& k = out.intrinsics;
  const Image& target = out.images[1];

  // Both distances share the numerator x'^T E x and differ only in the
  // line-normal lengths, so one shift of x' along E x clears both.
  for (std::size_t j = 0; j < 2; ++j) {
    const Mat3 e = essential_from_pose(params_to_pose(out.poses[j])).e;
    for (Match& m : out.matches[j]) {
      for (int attempt = 0; attempt < 8; ++attempt) {
        const Vec3 x = k.ray(m.p), xp = k.ray(m.p_prime);
        const Vec3 l = e * x, lp = e.transpose() * xp;
        const double n1 = std::hypot(l.x(), l.y()), n2 = std::hypot(lp.x(), lp.y());
        const double num = xp.dot(l);
        const double needed = margins.epipolar * std::max(n1, n2);
        if (n1 == 0.0 || std::abs(num) >= needed) break;
        const double side = num < 0.0 ? -1.0 : 1.0;
        const double delta = (side * needed * (1.0 + amount(rng)) - num) / n1;
        m.p_prime.u += delta * l.x() / n1 * k.fx;
        m.p_prime.v += delta * l.y() / n1 * k.fy;
      }
    }
  }

  for (int round = 0; round < 50; ++round) {
    std::array<std::vector<std::uint8_t>, 3> flag;
    for (auto& f : flag) f.assign(out.depths[1].size(), 0);
    bool any = false;
    auto mark = [&](int view, std::size_t i) {
      flag[static_cast<std::size_t>(view)][i] = 1;
      any = true;
    };

    const Pose t21 = params_to_pose(out.poses[0]);
    const Pose t23 = params_to_pose(out.poses[1]);
    std::array<WarpField, 2> warps{compute_warp(out.depths[1], t21, k, k), compute_warp(out.depths[1], t23, k, k)};
    std::array<double, 2> scale{};
    for (int j = 0; j < 2; ++j) {
      const int src = j == 0 ? 0 : 2;
      const WarpField& warp = warps[j];
      const SampleResult sd = bilinear_sample(out.depths[src], warp);
      scale[j] = masked_ratio(out.depths[1], sd.values, warp.valid);
      const double s = scale[j];
      std::vector<SampleResult> ch;
      for (const ScalarGrid& c : out.images[src]) ch.push_back(bilinear_sample(c, warp));
      for (std::size_t i = 0; i < warp.coords.size(); ++i) {
        const PixelCoord& p = warp.coords[i];
        if (p.u < -0.5) continue;  // behind the camera
        if (near_lattice(p, margins.lattice)) {
          mark(1, i);
          continue;
        }
        if (!warp.valid[i]) continue;
        for (std::size_t c = 0; c < ch.size(); ++c) {
          if (std::abs(ch[c].values[i] - target[c][i]) < margins.photometric) mark(1, i);
        }
        if (std::abs(s * sd.values[i] - out.depths[1][i]) < margins.depth * out.depths[1][i]) mark(1, i);
      }
    }
    const Pose t13 = chain_pose(t21, t23);
    const std::array<Pose, 2> chained{t13, invert(t13)};
    const std::array<ScalarGrid, 2> bar{scaled_grid(out.depths[0], scale[0]), scaled_grid(out.depths[2], scale[1])};
    for (int dir = 0; dir < 2; ++dir) {
      const WarpField warp = compute_warp(bar[dir], chained[dir], k, k);
      const SampleResult sd = bilinear_sample(bar[1 - dir], warp);
      const int view = dir == 0 ? 0 : 2;
      const Image& img_a = out.images[static_cast<std::size_t>(view)];
      std::vector<SampleResult> ch;
      for (const ScalarGrid& c : out.images[static_cast<std::size_t>(2 - view)]) ch.push_back(bilinear_sample(c, warp));
      for (std::size_t i = 0; i < warp.coords.size(); ++i) {
        const PixelCoord& p = warp.coords[i];
        if (p.u < -0.5) continue;
        if (near_lattice(p, margins.lattice)) {
          mark(view, i);
          continue;
        }
        if (!warp.valid[i]) continue;
        if (std::abs(bar[dir][i] - sd.values[i]) < margins.depth * bar[dir][i]) mark(view, i);
        for (std::size_t c = 0; c < ch.size(); ++c) {
          if (std::abs(ch[c].values[i] - img_a[c][i]) < margins.photometric) mark(view, i);
        }
      }
    }
    const NormalizedDepth nd = mean_normalize(out.depths[1]);
    const int h = nd.depth.height();
    const int w = nd.depth.width();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double c = nd.depth(y, x);
        if ((x + 1 < w && std::abs(nd.depth(y, x + 1) - c) < margins.smooth) ||
            (y + 1 < h && std::abs(nd.depth(y + 1, x) - c) < margins.smooth)) {
          mark(1, nd.depth.index(y, x));
        }
      }
    }
    if (!any) break;
    for (int v = 0; v < 3; ++v) {
      ScalarGrid& d = out.depths[v];
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (flag[static_cast<std::size_t>(v)][i]) d[i] *= 1.0 + margins.nudge * amount(rng);
      }
    }
  }
  return out;
}

SnippetInput perturb_snippet(const SnippetInput& input, const PerturbOptions& opts, std::uint64_t seed) {
  for (double v : {opts.depth_sigma, opts.rotation_sigma, opts.translation_sigma, opts.translation_fraction}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "perturbation sizes must be >= 0");
  }
  SnippetInput out = input;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto noise3 = [&] { return Vec3{gauss(rng), gauss(rng), gauss(rng)}; };
  for (ScalarGrid& d : out.depths) {
    for (double& v : d.values()) v *= std::max(0.1, 1.0 + opts.depth_sigma * gauss(rng));
  }
  for (PoseParams& p : out.poses) {
    p.rotation_vector += opts.rotation_sigma * noise3();
    p.translation += opts.translation_sigma * noise3();
    Vec3 dir = noise3();
    while (dir.norm() < 1e-12) dir = noise3();
    p.translation += opts.translation_fraction * input.poses[&p - out.poses.data()].translation.norm() * dir.normalized();
  }
  return out;
}

double translation_error(const SnippetInput& a, const SnippetInput& b) {
  double e = 0.0;
  for (std::size_t j = 0; j < 2; ++j) e += (a.poses[j].translation - b.poses[j].translation).norm();
  return e;
}

RefineResult gradient_descent_refine(const SnippetInput& input, const LossWeights& w, const RefineOptions& opts) {
  if (opts.steps < 1) throw Error(ErrorCode::InvalidArgument, "refinement needs at least one step");
  if (!(opts.learning_rate >= 0.0) || !std::isfinite(opts.learning_rate)) {
    throw Error(ErrorCode::InvalidArgument, "learning rate must be a finite value >= 0");
  }
  RefineResult res;
  res.final_state = input;
  SnippetInput& s = res.final_state;
  double initial = 0.0;
  for (int step = 0; step <= opts.steps; ++step) {
    const bool last = step == opts.steps;
    const LossReport r = total_loss(s, w, EvalOptions{!last, false});
    if (!std::isfinite(r.total)) throw Error(ErrorCode::NonFiniteEvaluation, "objective became non-finite");
    if (step == 0) initial = r.total;
    res.term_history.push_back(r.terms);
    res.total_history.push_back(r.total);
    if (r.total > 10.0 * initial && r.total > 0.0) {
      throw Error(ErrorCode::DivergenceDetected,
                  "objective exceeded 10x its initial value at step " + std::to_string(step));
    }
    if (last) break;
    const double lr = opts.learning_rate;
    if (opts.optimize_depth) {
      for (int v = 0; v < 3; ++v) {
        ScalarGrid& d = s.depths[v];
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= lr * r.grad_depths[v][i];
      }
    }
    if (opts.optimize_pose) {
      for (int j = 0; j < 2; ++j) {
        s.poses[j] = PoseParams::from_vector(s.poses[j].to_vector() - lr * r.grad_poses[j]);
      }
    }
  }
  return res;
}

}  // namespace geoconsist
