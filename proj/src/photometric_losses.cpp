#include "geoconsist/photometric_losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "compensated_sum.hpp"
#include "geoconsist/depth_consistency.hpp"
#include "geoconsist/view_synthesis.hpp"

namespace geoconsist {

namespace {

double sign(double x) { return (x > 0.0) - (x < 0.0); }

// out[i] = sum of `in` over the (2r+1)^2 window around i, clipped at the border.
void box_sum(const double* in, int h, int w, int r, std::vector<double>& tmp,
             std::vector<double>& out) {
  const std::size_t n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  tmp.assign(n, 0.0);
  out.assign(n, 0.0);
  for (int y = 0; y < h; ++y) {
    double* t = tmp.data() + static_cast<std::ptrdiff_t>(y) * w;
    for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) {
      const double* row = in + static_cast<std::ptrdiff_t>(yy) * w;
      for (int x = 0; x < w; ++x) t[x] += row[x];
    }
  }
  for (int y = 0; y < h; ++y) {
    const double* t = tmp.data() + static_cast<std::ptrdiff_t>(y) * w;
    double* o = out.data() + static_cast<std::ptrdiff_t>(y) * w;
    for (int dx = -r; dx <= r; ++dx) {
      const int lo = std::max(0, -dx);
      const int hi = std::min(w, w - dx);
      for (int x = lo; x < hi; ++x) o[x] += t[x + dx];
    }
  }
}

void check_images(const Image& a, const Image& b, const BinaryGrid& mask) {
  if (a.empty() || a.size() != b.size()) {
    throw Error(ErrorCode::InvalidArgument, "images need the same non-zero channel count");
  }
  for (std::size_t c = 0; c < a.size(); ++c) {
    if (!a[c].same_shape(b[c]) || !mask.same_shape(a[c])) {
      throw Error(ErrorCode::InvalidArgument, "image and mask shapes differ");
    }
  }
}

Image zeros_like(const Image& img) {
  Image out;
  out.reserve(img.size());
  for (const auto& ch : img) out.emplace_back(ch.height(), ch.width(), 0.0);
  return out;
}

}  // namespace

void SsimConfig::validate() const {
  if (!(c1 > 0.0) || !(c2 > 0.0) || patch < 3 || patch % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "SSIM needs c1, c2 > 0 and an odd patch >= 3");
  }
}

ImageLoss pixel_loss(const Image& target, const Image& synthesized, const BinaryGrid& mask, bool with_gradient) {
  check_images(target, synthesized, mask);
  const std::size_t m = mask.count();
  if (m == 0) throw Error(ErrorCode::EmptyMask, "pixel loss over an empty mask");

  ImageLoss out;
  if (with_gradient) out.grad_synthesized = zeros_like(target);
  const double norm = 1.0 / (static_cast<double>(m) * static_cast<double>(target.size()));
  detail::CompensatedSum total;
  for (std::size_t c = 0; c < target.size(); ++c) {
    const ScalarGrid& t = target[c];
    const ScalarGrid& s = synthesized[c];
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!mask[i]) continue;
      const double d = s[i] - t[i];
      total += std::abs(d);
      if (with_gradient) out.grad_synthesized[c][i] = sign(d) * norm;
    }
  }
  out.value = total.value() * norm;
  return out;
}

double ssim_index(std::span<const double> x, std::span<const double> y, const SsimConfig& cfg) {
  if (x.size() != y.size() || x.empty()) {
    throw Error(ErrorCode::InvalidArgument, "SSIM patches must be equal-sized and non-empty");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    vx += (x[k] - mx) * (x[k] - mx);
    vy += (y[k] - my) * (y[k] - my);
    cxy += (x[k] - mx) * (y[k] - my);
  }
  vx /= n;
  vy /= n;
  cxy /= n;
  return ((2.0 * mx * my + cfg.c1) * (2.0 * cxy + cfg.c2)) /
         ((mx * mx + my * my + cfg.c1) * (vx + vy + cfg.c2));
}

ImageLoss ssim_loss(const Image& target, const Image& synthesized, const BinaryGrid& mask, const SsimConfig& cfg,
                    bool with_gradient) {
  cfg.validate();
  check_images(target, synthesized, mask);
  const int h = mask.height();
  const int w = mask.width();
  const int r = cfg.patch / 2;
  if (h < cfg.patch || w < cfg.patch) {
    throw Error(ErrorCode::InvalidArgument, "image smaller than the SSIM patch");
  }
  const double n = static_cast<double>(cfg.patch * cfg.patch);
  const int full = cfg.patch * cfg.patch;
  const std::size_t np = mask.size();
  const auto uw = static_cast<std::size_t>(w);

  ImageLoss out;
  std::vector<double> coef_a, coef_b, coef_c, tmp, box_a, box_b, box_c;
  if (with_gradient) out.grad_synthesized = zeros_like(target);
  // Per row of centres: window sums via column sums, then centred second
  // moments accumulated offset by offset.
  std::vector<double> col_x(uw), col_y(uw), mean_x(uw), mean_y(uw), var_x(uw), var_y(uw), cov(uw);
  std::vector<int> col_mask(uw);
  std::size_t centres = 0;
  detail::CompensatedSum ssim_sum;

  for (std::size_t c = 0; c < target.size(); ++c) {
    const double* yv = target[c].values().data();
    const double* xv = synthesized[c].values().data();
    if (with_gradient) {
      coef_a.assign(np, 0.0);
      coef_b.assign(np, 0.0);
      coef_c.assign(np, 0.0);
    }
    const auto lo = static_cast<std::size_t>(r);
    const auto hi = uw - lo;
    for (int cy = r; cy < h - r; ++cy) {
      std::fill(col_x.begin(), col_x.end(), 0.0);
      std::fill(col_y.begin(), col_y.end(), 0.0);
      std::fill(col_mask.begin(), col_mask.end(), 0);
      for (int yy = cy - r; yy <= cy + r; ++yy) {
        const std::size_t row = static_cast<std::size_t>(yy) * uw;
        for (std::size_t x = 0; x < uw; ++x) {
          col_x[x] += xv[row + x];
          col_y[x] += yv[row + x];
          col_mask[x] += mask[row + x] ? 1 : 0;
        }
      }
      for (std::size_t x = lo; x < hi; ++x) {
        double sx = 0.0, sy = 0.0;
        for (std::size_t k = x - lo; k <= x + lo; ++k) {
          sx += col_x[k];
          sy += col_y[k];
        }
        mean_x[x] = sx / n;
        mean_y[x] = sy / n;
        var_x[x] = var_y[x] = cov[x] = 0.0;
      }
      for (int yy = cy - r; yy <= cy + r; ++yy) {
        const std::size_t row = static_cast<std::size_t>(yy) * uw;
        for (int dx = -r; dx <= r; ++dx) {
          const double* xr = xv + row + dx;
          const double* yr = yv + row + dx;
          for (std::size_t x = lo; x < hi; ++x) {
            const double ex = xr[x] - mean_x[x];
            const double ey = yr[x] - mean_y[x];
            var_x[x] += ex * ex;
            var_y[x] += ey * ey;
            cov[x] += ex * ey;
          }
        }
      }
      for (std::size_t x = lo; x < hi; ++x) {
        int m = 0;
        for (std::size_t k = x - lo; k <= x + lo; ++k) m += col_mask[k];
        if (m != full) continue;
        if (c == 0) ++centres;
        const double mx = mean_x[x];
        const double my = mean_y[x];
        const double vx = var_x[x] / n;
        const double vy = var_y[x] / n;
        const double cxy = cov[x] / n;
        const double a1 = 2.0 * mx * my + cfg.c1;
        const double a2 = 2.0 * cxy + cfg.c2;
        const double b1 = mx * mx + my * my + cfg.c1;
        const double b2 = vx + vy + cfg.c2;
        const double s = (a1 * a2) / (b1 * b2);
        ssim_sum += s;
        if (!with_gradient) continue;
        // d s / d x_p = (A + B x_p + C y_p) / n for every p in the window.
        const double d_mx = s * (2.0 * my / a1 - 2.0 * mx / b1);
        const double d_cxy = s * 2.0 / a2;
        const double d_vx = -s / b2;
        const std::size_t i = static_cast<std::size_t>(cy) * uw + x;
        coef_a[i] = d_mx - 2.0 * d_vx * mx - d_cxy * my;
        coef_b[i] = 2.0 * d_vx;
        coef_c[i] = d_cxy;
      }
    }
    if (centres == 0) throw Error(ErrorCode::EmptyMask, "no SSIM patch fits inside the mask");
    if (!with_gradient) continue;
    box_sum(coef_a.data(), h, w, r, tmp, box_a);
    box_sum(coef_b.data(), h, w, r, tmp, box_b);
    box_sum(coef_c.data(), h, w, r, tmp, box_c);
    ScalarGrid& g = out.grad_synthesized[c];
    for (std::size_t i = 0; i < np; ++i) g[i] = box_a[i] + box_b[i] * xv[i] + box_c[i] * yv[i];
  }

  const double count = static_cast<double>(centres * target.size());
  if (with_gradient) {
    const double k = -0.5 / (count * n);  // d loss / d ssim of one patch, over n
    for (ScalarGrid& g : out.grad_synthesized)
      for (double& v : g.values()) v *= k;
  }
  out.value = 0.5 * (1.0 - ssim_sum.value() / count);
  return out;
}

DepthLoss smoothness_loss(const ScalarGrid& depth, const Image& image, bool with_gradient) {
  const int h = depth.height();
  const int w = depth.width();
  if (h < 2 || w < 2) throw Error(ErrorCode::InvalidArgument, "smoothness needs at least a 2x2 grid");
  if (image.empty()) throw Error(ErrorCode::InvalidArgument, "smoothness needs a guide image");
  for (const auto& ch : image) {
    if (!ch.same_shape(depth)) throw Error(ErrorCode::InvalidArgument, "image and depth shapes differ");
  }
  const double channels = static_cast<double>(image.size());
  const double nx = 1.0 / (static_cast<double>(h) * (w - 1));
  const double ny = 1.0 / (static_cast<double>(h - 1) * w);

  DepthLoss out;
  if (with_gradient) out.grad_depth = ScalarGrid(h, w, 0.0);
  detail::CompensatedSum sx, sy;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) {
        double gi = 0.0;
        for (const auto& ch : image) gi += std::abs(ch(y, x + 1) - ch(y, x));
        const double weight = std::exp(-gi / channels);
        const double d = depth(y, x + 1) - depth(y, x);
        sx += std::abs(d) * weight;
        if (with_gradient) {
          const double g = sign(d) * weight * nx;
          out.grad_depth(y, x + 1) += g;
          out.grad_depth(y, x) -= g;
        }
      }
      if (y + 1 < h) {
        double gi = 0.0;
        for (const auto& ch : image) gi += std::abs(ch(y + 1, x) - ch(y, x));
        const double weight = std::exp(-gi / channels);
        const double d = depth(y + 1, x) - depth(y, x);
        sy += std::abs(d) * weight;
        if (with_gradient) {
          const double g = sign(d) * weight * ny;
          out.grad_depth(y + 1, x) += g;
          out.grad_depth(y, x) -= g;
        }
      }
    }
  }
  out.value = sx.value() * nx + sy.value() * ny;
  return out;
}

LossValue baseline_loss(const Image& target, const ScalarGrid& depth_t, const Intrinsics& k_t,
                        std::span<const SourceView> sources, double alpha, double beta, const SsimConfig& cfg) {
  if (!(alpha >= 0.0 && alpha <= 1.0) || !(beta >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "baseline weights need 0 <= alpha <= 1 and beta >= 0");
  }
  LossValue out;
  out.grad_depth = ScalarGrid(depth_t.height(), depth_t.width(), 0.0);

  for (const SourceView& src : sources) {
    const Pose pose = params_to_pose(src.pose);
    const SynthesizedView view = synthesize_view(src.image, depth_t, pose, k_t, src.intrinsics);
    Image synth;
    for (const auto& ch : view.channels) synth.push_back(ch.values);

    const ImageLoss pl = pixel_loss(target, synth, view.warp.valid);
    const ImageLoss sl = ssim_loss(target, synth, view.warp.valid, cfg);
    out.value += alpha * pl.value + (1.0 - alpha) * sl.value;

    std::vector<Vec2> grad_coords(depth_t.size(), Vec2::Zero());
    for (std::size_t c = 0; c < synth.size(); ++c) {
      ScalarGrid g = pl.grad_synthesized[c];
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = alpha * g[i] + (1.0 - alpha) * sl.grad_synthesized[c][i];
      }
      accumulate_coord_gradient(view.channels[c], g, grad_coords);
    }
    PoseGradient pg;
    accumulate_warp_gradient(view.warp, grad_coords, out.grad_depth, pg);
    out.grad_pose.push_back(to_param_gradient(pg, src.pose));
  }

  if (beta > 0.0) {
    const NormalizedDepth nd = mean_normalize(depth_t);
    const DepthLoss sm = smoothness_loss(nd.depth, target);
    out.value += beta * sm.value;
    const ScalarGrid g = mean_normalize_backward(depth_t, sm.grad_depth);
    for (std::size_t i = 0; i < g.size(); ++i) out.grad_depth[i] += beta * g[i];
  }
  return out;
}

}  // namespace geoconsist
