// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "geoconsist/depth_consistency.hpp"
#include "geoconsist/io.hpp"
#include "geoconsist/objective.hpp"
#include "geoconsist/photometric_losses.hpp"
#include "geoconsist/pixel_masking.hpp"
#include "geoconsist/sparse_geometry.hpp"
#include "geoconsist/synthetic_scene.hpp"
#include "geoconsist/trajectory_eval.hpp"
#include "geoconsist/uncertainty_sim.hpp"
#include "geoconsist/view_synthesis.hpp"

using namespace geoconsist;

namespace {

// Interpolation floor for the pixel and SSIM terms on [0, 1] intensities.
constexpr double kPhotometricFloor = 0.01;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void run(int id, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.passed) ++failures;
  std::printf("%s %d %s: %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticScene scene = make_scenario("plane", 7, 64, 64, 5);
  scene.channels = 1;
  SnippetInput in = make_snippet(scene, 2, 100, 3);
  in = perturb_snippet(in, {0.02, 0.003, 0.01, 0.0}, 11);
  in = nudge_off_kinks(in, {}, 12);
  const ObjectiveCheckReport rep = check_objective_gradients(in, LossWeights{});
  const double secs = elapsed_since(t0);
  double worst = 0.0;
  std::string worst_name;
  std::size_t coords = 0;
  for (std::size_t i = 0; i < rep.reports.size(); ++i) {
    coords = std::max(coords, rep.reports[i].coordinates);
    if (rep.reports[i].max_relative_error >= worst) {
      worst = rep.reports[i].max_relative_error;
      worst_name = rep.names[i];
    }
  }
  return {rep.passed && worst < 1e-4 && secs < 60.0,
          fmt("max rel error %.3g (%s) over %zu terms, up to %zu coordinates, %.1f s of 60", worst, worst_name.c_str(),
              rep.reports.size(), coords, secs)};
}

Outcome zero_loss_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const SyntheticScene scene = make_scenario("plane", 7, 64, 64, 5);
  const SnippetInput in = make_snippet(scene, 2, 100, 3);
  const LossReport r = total_loss(in, {}, {false});
  const double mean_depth = in.depths[1].mean();
  const TermValues& t = r.terms;
  const double secs = elapsed_since(t0);
  const bool ok = t.epi < 1e-9 && t.reproj < 1e-6 && t.pixel < kPhotometricFloor && t.ssim < kPhotometricFloor &&
                  t.depth < 1e-3 * mean_depth && t.multi < 1e-3 * mean_depth && r.degraded.empty() && secs < 10.0;
  return {ok, fmt("epi %.2g reproj %.2g px pixel %.2g ssim %.2g depth %.2g multi %.2g (depth floor %.3g), %.2f s", t.epi,
                  t.reproj, t.pixel, t.ssim, t.depth, t.multi, 1e-3 * mean_depth, secs)};
}

Outcome scale_invariance() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  std::normal_distribution<double> n;

  // Depth consistency under rescaling of the synthesized depth.
  ScalarGrid target(32, 32), synth(32, 32);
  for (double& v : target.values()) v = u(rng);
  for (double& v : synth.values()) v = u(rng);
  const BinaryGrid mask(32, 32, true);
  const double base = depth_consistency_term(target, synth, mask).value;
  double depth_dev = 0.0;
  for (double lambda : {0.001, 0.37, 2.0, 3.3, 1024.0, 7e4}) {
    ScalarGrid s = synth;
    for (double& v : s.values()) v *= lambda;
    depth_dev = std::max(depth_dev, std::abs(depth_consistency_term(target, s, mask).value - base) / base);
  }

  // Snippet ATE under rescaling of the estimated translations.
  Snippet gt, est;
  for (int i = 0; i < 3; ++i) {
    const Pose p{rotation_from_vector(Vec3{0, 0.05 * i, 0}), Vec3{0.1 * i, 0.0, 1.2 * i}};
    gt.poses.push_back(p);
    Pose q = p;
    if (i > 0) q.translation += 0.03 * Vec3{n(rng), n(rng), n(rng)};
    est.poses.push_back(q);
  }
  const double ate = snippet_ate(est, gt);
  double ate_dev = 0.0;
  for (double lambda : {0.01, 0.5, 3.0, 250.0}) {
    Snippet s = est;
    for (Pose& p : s.poses) p.translation *= lambda;
    ate_dev = std::max(ate_dev, std::abs(snippet_ate(s, gt) - ate) / ate);
  }

  // Epipolar residual under t -> lambda t for exact inliers.
  const SyntheticScene scene = make_scenario("plane_sphere", 9, 64, 64, 5);
  const MatchSet matches = generate_matches(scene, 2, 3, 100, 9).matches;
  const Pose rel = relative_pose(scene, 2, 3);
  const double epi = epipolar_loss(matches, rel, scene.intrinsics, scene.intrinsics).value;
  double epi_dev = 0.0;
  for (double lambda : {0.1, 4.0, 30.0}) {
    const Pose scaled{rel.rotation, lambda * rel.translation};
    epi_dev = std::max(epi_dev, std::abs(epipolar_loss(matches, scaled, scene.intrinsics, scene.intrinsics).value - epi));
  }
  const bool ok = depth_dev <= 1e-14 && ate_dev < 1e-12 && epi < 1e-9 && epi_dev < 1e-9;
  return {ok, fmt("depth rel dev %.2g, ATE rel dev %.2g, epipolar %.2g with max change %.2g", depth_dev, ate_dev, epi,
                  epi_dev)};
}

Outcome descent_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const SyntheticScene scene = make_scenario("slanted", 7, 64, 64, 5);
  const SnippetInput gt = make_snippet(scene, 2, 100, 3);
  const SnippetInput start = perturb_snippet(gt, {0.0, 0.0, 0.0, 0.05}, 42);
  RefineOptions opts;
  opts.steps = 200;
  opts.learning_rate = 1e-4;
  opts.optimize_depth = false;
  const RefineResult r = gradient_descent_refine(start, LossWeights{}, opts);
  const double before = translation_error(start, gt);
  const double after = translation_error(r.final_state, gt);
  const double reduction = 1.0 - after / before;
  const double secs = elapsed_since(t0);
  return {reduction >= 0.5 && secs < 120.0,
          fmt("translation error %.4g -> %.4g, reduction %.1f%% (need 50%%), %.1f s of 120", before, after,
              100.0 * reduction, secs)};
}

Outcome mask_arithmetic() {
  std::mt19937_64 rng(17);
  // Nearest-rank counts on rank-distinct inputs.
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 8 + static_cast<int>(rng() % 40), w = 8 + static_cast<int>(rng() % 40);
    std::vector<double> v(static_cast<std::size_t>(h * w));
    std::iota(v.begin(), v.end(), 1.0);
    std::shuffle(v.begin(), v.end(), rng);
    const ScalarGrid e(h, w, v);
    const double q = std::uniform_real_distribution<double>(1.0, 99.0)(rng);
    const auto expected = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(v.size())));
    if (error_mask(e, BinaryGrid(h, w, true), {q, 90.0}).count() != expected) ++mismatches;
  }
  {
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    const ScalarGrid e(10, 10, v);
    if (error_mask(e, BinaryGrid(10, 10, true)).count() != 90) ++mismatches;
    if (error_mask(e, BinaryGrid(10, 10, true), {50.0, 90.0}).count() != 50) ++mismatches;
  }
  // Composite of independent 90% and 10% masks.
  double lo = 1.0, hi = 0.0;
  std::bernoulli_distribution keep90(0.9), keep10(0.1);
  for (int trial = 0; trial < 10; ++trial) {
    BinaryGrid a(128, 416), b(128, 416);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a.set(i, keep90(rng));
      b.set(i, keep10(rng));
    }
    const double frac = static_cast<double>(composite_mask(a, b).count()) / static_cast<double>(a.size());
    lo = std::min(lo, frac);
    hi = std::max(hi, frac);
  }
  return {mismatches == 0 && lo >= 0.05 && hi <= 0.14,
          fmt("%d nearest-rank mismatches, composite kept fraction in [%.4f, %.4f]", mismatches, lo, hi)};
}

Outcome uncertainty_sweep() {
  const std::vector<double> angles{5, 15, 30, 45, 60, 90};
  const std::vector<BaselineSample> s = uncertainty_vs_baseline(angles, 0.005);
  bool monotone = s.size() == angles.size();
  double mass_dev = 0.0;
  std::string curve;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0 && !(s[i].largest_eigenvalue < s[i - 1].largest_eigenvalue)) monotone = false;
    mass_dev = std::max(mass_dev, std::abs(s[i].mass - 1.0));
    curve += fmt("%s%g:%.3g", i ? " " : "", s[i].angle_deg, s[i].largest_eigenvalue);
  }
  return {monotone && mass_dev < 1e-6, fmt("eigenvalues %s, mass dev %.2g", curve.c_str(), mass_dev)};
}

Outcome trajectory_suite() {
  const SyntheticScene scene = make_scenario("circle", 1, 16, 16, 40);
  const Trajectory gt{scene.camera_to_world};
  std::vector<Snippet> snippets;
  for (std::size_t i = 0; i + 3 <= gt.poses.size(); ++i) snippets.push_back(slice_snippet(gt, i, 3));
  const double mape = median_ape(chain_snippets(snippets), gt);

  std::mt19937_64 rng(19);
  std::normal_distribution<double> n;
  std::vector<Pose> poses;
  for (int i = 0; i < 100; ++i) {
    const Vec3 w{n(rng), n(rng), n(rng)};
    poses.push_back(params_to_pose({w * (2.5 / std::max(1.0, w.norm())), 20.0 * Vec3{n(rng), n(rng), n(rng)}}));
  }
  const auto path = std::filesystem::temp_directory_path() / "geoconsist_acceptance_poses.txt";
  io::write_kitti_poses(path, poses);
  const std::vector<Pose> back = io::read_kitti_poses(path);
  std::filesystem::remove(path);
  double dev = back.size() == poses.size() ? 0.0 : 1.0;
  for (std::size_t i = 0; i < std::min(back.size(), poses.size()); ++i) {
    dev = std::max(dev, (back[i].rotation - poses[i].rotation).cwiseAbs().maxCoeff());
    dev = std::max(dev, (back[i].translation - poses[i].translation).cwiseAbs().maxCoeff());
  }
  return {mape < 1e-6 && dev < 1e-8,
          fmt("mAPE %.3g over %zu frames, KITTI round-trip deviation %.3g", mape, gt.poses.size(), dev)};
}

Outcome hand_example() {
  const ScalarGrid target(1, 2, std::vector<double>{1.0, 1.0});
  const ScalarGrid synth(1, 2, std::vector<double>{1.0, 3.0});
  const BinaryGrid mask(1, 2, true);
  std::vector<std::uint64_t> bits;
  for (int i = 0; i < 5; ++i) bits.push_back(std::bit_cast<std::uint64_t>(depth_consistency_term(target, synth, mask).value));
  const bool stable = std::all_of(bits.begin(), bits.end(), [&](std::uint64_t b) { return b == bits.front(); });
  const double v = std::bit_cast<double>(bits.front());
  return {v == 0.5 && stable, fmt("loss %.17g, bits 0x%016llx, stable %s", v, static_cast<unsigned long long>(bits.front()),
                                  stable ? "yes" : "no")};
}

}  // namespace

int main() {
  run(1, "gradient suite", gradient_suite);
  run(2, "zero-loss oracle", zero_loss_oracle);
  run(3, "scale invariance", scale_invariance);
  run(4, "descent recovery", descent_recovery);
  run(5, "mask arithmetic", mask_arithmetic);
  run(6, "uncertainty sweep", uncertainty_sweep);
  run(7, "trajectory suite", trajectory_suite);
  run(8, "depth consistency hand example", hand_example);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
