#include "geoconsist/depth_consistency.hpp"

#include <cmath>

#include "compensated_sum.hpp"
#include "multiview_detail.hpp"

namespace geoconsist {

namespace {

double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

NormalizedDepth mean_normalize(const ScalarGrid& depth) {
  for (double d : depth.values()) {
    if (!(d > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "mean normalization needs positive depth");
  }
  const double m = depth.mean();
  NormalizedDepth out{depth, 1.0 / m};
  for (double& v : out.depth.values()) v /= m;
  return out;
}

ScalarGrid mean_normalize_backward(const ScalarGrid& depth, const ScalarGrid& grad_normalized) {
  const double n = static_cast<double>(depth.size());
  const double m = depth.mean();
  double dot = 0.0;
  for (std::size_t i = 0; i < depth.size(); ++i) dot += grad_normalized[i] * depth[i];
  const double shared = dot / (m * m * n);
  ScalarGrid out(depth.height(), depth.width(), 0.0);
  for (std::size_t i = 0; i < depth.size(); ++i) out[i] = grad_normalized[i] / m - shared;
  return out;
}

double aligned_scale_ratio(const ScalarGrid& target, const ScalarGrid& synth, const BinaryGrid& mask) {
  if (!target.same_shape(synth) || !mask.same_shape(target)) {
    throw Error(ErrorCode::InvalidArgument, "depth maps and mask shapes differ");
  }
  detail::CompensatedSum st_sum, ss_sum;
  std::size_t m = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!mask[i]) continue;
    st_sum += target[i];
    ss_sum += synth[i];
    ++m;
  }
  const double st = st_sum.value();
  const double ss = ss_sum.value();
  if (m == 0) throw Error(ErrorCode::EmptyMask, "scale ratio over an empty mask");
  if (!(ss > 0.0) || !(st > 0.0)) throw Error(ErrorCode::ZeroSynthMean, "masked depth mean is not positive");
  return st / ss;
}

double aligned_scale_ratio(const ScalarGrid& target, const SampleResult& synth, const BinaryGrid& mask) {
  return aligned_scale_ratio(target, synth.values, mask);
}

ConsistencyTerm depth_consistency_term(const ScalarGrid& target, const ScalarGrid& synth, const BinaryGrid& mask) {
  const double s = aligned_scale_ratio(target, synth, mask);
  const double m = static_cast<double>(mask.count());
  detail::CompensatedSum synth_acc;
  for (std::size_t i = 0; i < synth.size(); ++i)
    if (mask[i]) synth_acc += synth[i];
  const double synth_sum = synth_acc.value();

  ConsistencyTerm out;
  out.scale = s;
  out.grad_target = ScalarGrid(target.height(), target.width(), 0.0);
  out.grad_synth = ScalarGrid(target.height(), target.width(), 0.0);
  detail::CompensatedSum total;
  double g_scale = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!mask[i]) continue;
    const double r = s * synth[i] - target[i];
    total += std::abs(r);
    const double e = sign(r) / m;
    out.grad_synth[i] = e * s;
    out.grad_target[i] = -e;
    g_scale += e * synth[i];
  }
  out.value = total.value() / m;
  // s = sum(target) / sum(synth) over the mask
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!mask[i]) continue;
    out.grad_target[i] += g_scale / synth_sum;
    out.grad_synth[i] -= g_scale * s / synth_sum;
  }
  return out;
}

LossValue depth_consistency_loss(const ScalarGrid& target_depth, const SampleResult& synth, const BinaryGrid& mask) {
  ConsistencyTerm t = depth_consistency_term(target_depth, synth.values, mask);
  LossValue out;
  out.value = t.value;
  out.grad_depth = std::move(t.grad_target);
  return out;
}

PairConsistency pairwise_depth_consistency(const ScalarGrid& target_depth, const ScalarGrid& source_depth,
                                           const PoseParams& params, const Intrinsics& k_t,
                                           const Intrinsics& k_s) {
  if (!target_depth.same_shape(source_depth)) {
    throw Error(ErrorCode::InvalidArgument, "target and source depth shapes differ");
  }
  const Pose pose = params_to_pose(params);
  const WarpField warp = compute_warp(target_depth, pose, k_t, k_s);
  const SampleResult synth = bilinear_sample(source_depth, warp);
  const ConsistencyTerm term = depth_consistency_term(target_depth, synth.values, warp.valid);

  PairConsistency out;
  out.value = term.value;
  out.grad_target_depth = term.grad_target;
  out.grad_source_depth = ScalarGrid(source_depth.height(), source_depth.width(), 0.0);
  PoseGradient pg;
  detail::backprop_sampled_map(warp, synth, term.grad_synth, &out.grad_target_depth, &out.grad_source_depth, &pg);
  out.grad_pose = to_param_gradient(pg, params);
  return out;
}

Pose chain_pose(const Pose& pose_2to1, const Pose& pose_2to3) {
  return compose(pose_2to3, invert(pose_2to1));
}

MultiviewLoss multiview_loss(const std::array<Image, 3>& frames, const std::array<ScalarGrid, 3>& depths,
                             const PoseParams& pose_2to1, const PoseParams& pose_2to3, const Intrinsics& k,
                             double alpha, const SsimConfig& cfg) {
  for (const auto& d : depths) {
    if (!d.same_shape(depths[1])) throw Error(ErrorCode::InvalidArgument, "depth maps differ in size");
  }
  const Pose t21 = params_to_pose(pose_2to1);
  const Pose t23 = params_to_pose(pose_2to3);
  const WarpField w21 = compute_warp(depths[1], t21, k, k);
  const WarpField w23 = compute_warp(depths[1], t23, k, k);
  const SampleResult s21 = bilinear_sample(depths[0], w21);
  const SampleResult s23 = bilinear_sample(depths[2], w23);

  MultiviewLoss out;
  for (auto& g : out.grad_depths) g = ScalarGrid(depths[1].height(), depths[1].width(), 0.0);
  PoseGradient g21, g23;
  detail::MultiviewAccumulator acc{&out.grad_depths, &g21, &g23};
  out.value = detail::multiview_term(frames, depths, t21, t23, k, alpha, cfg, {&w21, &s21}, {&w23, &s23}, 1.0,
                                     &acc, out.empty_directions);
  out.grad_poses[0] = to_param_gradient(g21, pose_2to1);
  out.grad_poses[1] = to_param_gradient(g23, pose_2to3);
  return out;
}

namespace detail {

void backprop_sampled_map(const WarpField& warp, const SampleResult& sample, const ScalarGrid& grad_values,
                          ScalarGrid* grad_target_depth, ScalarGrid* grad_source, PoseGradient* grad_pose) {
  if (grad_source) accumulate_source_gradient(warp, grad_values, *grad_source);
  if (grad_target_depth && grad_pose) {
    std::vector<Vec2> gc(grad_values.size(), Vec2::Zero());
    accumulate_coord_gradient(sample, grad_values, gc);
    accumulate_warp_gradient(warp, gc, *grad_target_depth, *grad_pose);
  }
}

namespace {

struct ScaledView {
  double scale = 1.0;
  double synth_sum = 0.0;
  bool ok = false;
};

ScaledView target_scale(const ScalarGrid& target_depth, const TargetWarp& tw) {
  ScaledView sv;
  detail::CompensatedSum st_acc, synth_acc;
  for (std::size_t i = 0; i < target_depth.size(); ++i) {
    if (!tw.warp->valid[i]) continue;
    st_acc += target_depth[i];
    synth_acc += tw.synth_depth->values[i];
  }
  const double st = st_acc.value();
  sv.synth_sum = synth_acc.value();
  if (st > 0.0 && sv.synth_sum > 0.0) {
    sv.scale = st / sv.synth_sum;
    sv.ok = true;
  }
  return sv;
}

ScalarGrid scaled(const ScalarGrid& g, double s) {
  ScalarGrid out = g;
  for (double& v : out.values()) v *= s;
  return out;
}

}  // namespace

double multiview_term(const std::array<Image, 3>& frames, const std::array<ScalarGrid, 3>& depths,
                      const Pose& t21, const Pose& t23, const Intrinsics& k, double alpha, const SsimConfig& cfg,
                      const TargetWarp& to1, const TargetWarp& to3, double weight, MultiviewAccumulator* acc,
                      int& empty_directions) {
  const ScaledView sv1 = target_scale(depths[1], to1);
  const ScaledView sv3 = target_scale(depths[1], to3);
  if (!sv1.ok || !sv3.ok) {
    empty_directions += 2;
    return 0.0;
  }
  const std::array<ScalarGrid, 2> bar{scaled(depths[0], sv1.scale), scaled(depths[2], sv3.scale)};
  const Pose t13 = chain_pose(t21, t23);
  const Pose t31 = invert(t13);

  const int h = depths[1].height();
  const int w = depths[1].width();
  std::array<ScalarGrid, 2> g_bar{ScalarGrid(h, w, 0.0), ScalarGrid(h, w, 0.0)};
  PoseGradient g13, g31;
  double value = 0.0;

  // dir 0: view 1 -> view 3 ; dir 1: view 3 -> view 1
  for (int dir = 0; dir < 2; ++dir) {
    const int a = dir;      // index into bar / g_bar of the warped view
    const int b = 1 - dir;  // index of the sampled view
    const Image& img_a = frames[dir == 0 ? 0 : 2];
    const Image& img_b = frames[dir == 0 ? 2 : 0];
    const Pose& pose = dir == 0 ? t13 : t31;

    const bool grads = acc != nullptr;
    const WarpField warp = compute_warp(bar[a], pose, k, k, grads);
    const std::size_t m = warp.valid.count();
    if (m == 0) {
      ++empty_directions;
      continue;
    }
    std::vector<SampleResult> synth_ch;
    Image synth;
    for (const auto& ch : img_b) {
      synth_ch.push_back(bilinear_sample(ch, warp, grads));
      synth.push_back(synth_ch.back().values);
    }
    const SampleResult synth_depth = bilinear_sample(bar[b], warp, grads);

    const ImageLoss pl = pixel_loss(img_a, synth, warp.valid, grads);
    ImageLoss sl;
    bool have_ssim = true;
    try {
      sl = ssim_loss(img_a, synth, warp.valid, cfg, grads);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyMask) throw;
      have_ssim = false;
    }
    detail::CompensatedSum depth_acc;
    for (std::size_t i = 0; i < warp.coords.size(); ++i) {
      if (warp.valid[i]) depth_acc += std::abs(bar[a][i] - synth_depth.values[i]);
    }
    const double depth_term = depth_acc.value() / static_cast<double>(m);
    value += 0.5 * (alpha * pl.value + (have_ssim ? (1.0 - alpha) * sl.value : 0.0) + depth_term);

    if (!acc) continue;
    const double sc = 0.5 * weight;
    std::vector<Vec2> gc(warp.coords.size(), Vec2::Zero());
    for (std::size_t c = 0; c < synth.size(); ++c) {
      ScalarGrid g(h, w, 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = sc * (alpha * pl.grad_synthesized[c][i] + (have_ssim ? (1.0 - alpha) * sl.grad_synthesized[c][i] : 0.0));
      }
      accumulate_coord_gradient(synth_ch[c], g, gc);
    }
    ScalarGrid g_synth_depth(h, w, 0.0);
    for (std::size_t i = 0; i < warp.coords.size(); ++i) {
      if (!warp.valid[i]) continue;
      const double e = sc * sign(bar[a][i] - synth_depth.values[i]) / static_cast<double>(m);
      g_bar[a][i] += e;
      g_synth_depth[i] = -e;
    }
    accumulate_coord_gradient(synth_depth, g_synth_depth, gc);
    accumulate_source_gradient(warp, g_synth_depth, g_bar[b]);
    accumulate_warp_gradient(warp, gc, g_bar[a], dir == 0 ? g13 : g31);
  }

  if (!acc) return value;

  // T31 = T13^-1 ; T13 = T23 * T21^-1
  invert_backward(t13, g31, g13);
  const Pose inv21 = invert(t21);
  PoseGradient g_inv21;
  compose_backward(t23, inv21, g13, *acc->grad_2to3, g_inv21);
  invert_backward(t21, g_inv21, *acc->grad_2to1);

  // bar_j = s_j * D_j with s_j = sum_M D_2 / sum_M synth_j
  const std::array<const ScaledView*, 2> svs{&sv1, &sv3};
  const std::array<const TargetWarp*, 2> tws{&to1, &to3};
  const std::array<int, 2> depth_index{0, 2};
  std::array<ScalarGrid, 3>& gd = *acc->grad_depths;
  for (int j = 0; j < 2; ++j) {
    const ScalarGrid& d = depths[depth_index[j]];
    const double s = svs[j]->scale;
    double g_s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      gd[depth_index[j]][i] += s * g_bar[j][i];
      g_s += g_bar[j][i] * d[i];
    }
    const TargetWarp& tw = *tws[j];
    ScalarGrid g_synth(h, w, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!tw.warp->valid[i]) continue;
      gd[1][i] += g_s / svs[j]->synth_sum;
      g_synth[i] = -g_s * s / svs[j]->synth_sum;
    }
    backprop_sampled_map(*tw.warp, *tw.synth_depth, g_synth, &gd[1], &gd[depth_index[j]],
                         j == 0 ? acc->grad_2to1 : acc->grad_2to3);
  }
  return value;
}

}  // namespace detail

}  // namespace geoconsist
