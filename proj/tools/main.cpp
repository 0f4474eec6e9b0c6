#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geoconsist/io.hpp"
#include "geoconsist/objective.hpp"
#include "geoconsist/synthetic_scene.hpp"
#include "geoconsist/trajectory_eval.hpp"
#include "geoconsist/uncertainty_sim.hpp"

namespace fs = std::filesystem;
using namespace geoconsist;

namespace {

constexpr int kUsage = 2;
constexpr int kData = 1;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string term_row(const TermValues& t, double total) {
  return num(t.pixel) + ',' + num(t.ssim) + ',' + num(t.smooth) + ',' + num(t.epi) + ',' + num(t.reproj) + ',' +
         num(t.depth) + ',' + num(t.multi) + ',' + num(total);
}

const char* kTermHeader = "pixel,ssim,smooth,epi,reproj,depth,multi,total";

void add_weights(CLI::App* cmd, LossWeights& w) {
  cmd->add_option("--alpha", w.alpha, "pixel vs SSIM mix")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--beta", w.beta, "smoothness weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--gamma1", w.gamma1, "epipolar weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--gamma2", w.gamma2, "re-projection weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--mu1", w.mu1, "depth consistency weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--mu2", w.mu2, "multi-view consistency weight")->capture_default_str()->check(CLI::NonNegativeNumber);
}

// Where a snippet comes from: a sequence directory written by `synth`, or a
// scenario rendered in memory.
struct SnippetSource {
  std::string dir;
  int first = 0;
  std::string scenario;
  int width = 64;
  int height = 64;
  int channels = 3;
  int matches = 100;
  std::string phase = "train";
  MaskConfig mask;
  std::string poses_file;
  bool euler = false;
};

void add_source(CLI::App* cmd, SnippetSource& s, bool allow_scenario) {
  auto* dir = cmd->add_option("--dir", s.dir, "sequence directory written by synth");
  cmd->add_option("--first", s.first, "first frame of the snippet (target is first + 1)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  if (allow_scenario) {
    auto* sc = cmd->add_option("--scenario", s.scenario, "render a built-in scenario instead of reading --dir")
                   ->check(CLI::IsMember(scenario_names()));
    sc->excludes(dir);
    cmd->add_option("--width", s.width, "scenario width")->capture_default_str()->check(CLI::Range(8, 4096));
    cmd->add_option("--height", s.height, "scenario height")->capture_default_str()->check(CLI::Range(8, 4096));
    cmd->add_option("--channels", s.channels, "scenario channels (1 or 3)")
        ->capture_default_str()
        ->check(CLI::IsMember({1, 3}));
    cmd->add_option("--matches", s.matches, "matches per pair")->capture_default_str()->check(CLI::Range(1, 100000));
  } else {
    dir->required();
  }
  cmd->add_option("--phase", s.phase, "mask phase")->capture_default_str()->check(CLI::IsMember({"train", "refine"}));
  cmd->add_option("--error-percentile", s.mask.error_percentile, "error mask percentile")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 100.0));
  cmd->add_option("--gradient-percentile", s.mask.gradient_percentile, "gradient mask percentile")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 100.0));
  cmd->add_option("--poses", s.poses_file,
                  "override the snippet poses: two lines 'tx ty tz a b c' (target->source for 2->1, 2->3)")
      ->check(CLI::ExistingFile);
  cmd->add_flag("--euler", s.euler, "read a b c in --poses as Euler angles (R = Rx Ry Rz) instead of a rotation vector");
}

// Ground-truth snippet plus the copy with --poses applied, if any.
struct LoadedSnippet {
  SnippetInput truth;
  SnippetInput input;
};

LoadedSnippet load(const SnippetSource& s, std::uint64_t seed) {
  LoadedSnippet out;
  if (!s.dir.empty()) {
    out.truth = io::load_snippet(s.dir, s.first);
  } else {
    const std::string name = s.scenario.empty() ? "plane" : s.scenario;
    SyntheticScene scene = make_scenario(name, seed, s.width, s.height, s.first + 3);
    scene.channels = s.channels;
    out.truth = make_snippet(scene, s.first + 1, s.matches, seed);
  }
  out.truth.phase = s.phase == "refine" ? MaskPhase::Refine : MaskPhase::Train;
  out.truth.mask = s.mask;
  out.input = out.truth;
  if (!s.poses_file.empty()) {
    const auto poses = io::read_relative_poses(s.poses_file, s.euler);
    out.input.poses = poses;
  }
  return out;
}

void report_degraded(const LossReport& r) {
  for (const DegradedTerm& d : r.degraded) {
    std::cerr << "warning: term " << d.term;
    if (d.source >= 0) std::cerr << " (source " << d.source << ")";
    std::cerr << " contributed 0: " << to_string(d.reason) << '\n';
  }
}

int run_synth(const std::string& scenario, std::uint64_t seed, int width, int height, int frames, int channels,
              int matches, int snippet_length, const std::string& out) {
  SyntheticScene scene = make_scenario(scenario, seed, width, height, frames);
  scene.channels = channels;
  io::write_sequence(out, scene, matches, seed);
  const Trajectory traj{scene.camera_to_world};
  const auto n = scene.camera_to_world.size();
  const auto len = static_cast<std::size_t>(snippet_length);
  for (std::size_t i = 0; i + len <= n; ++i) {
    io::write_kitti_poses(fs::path(out) / ("snippet_" + std::to_string(i) + ".txt"),
                          slice_snippet(traj, i, len).poses);
  }
  return 0;
}

int run_loss(const SnippetSource& src, const LossWeights& w) {
  const LoadedSnippet s = load(src, 0);
  const LossReport r = total_loss(s.input, w, EvalOptions{.gradients = false});
  report_degraded(r);
  std::cout << kTermHeader << '\n' << term_row(r.terms, r.total) << '\n';
  return 0;
}

struct GradcheckArgs {
  PerturbOptions perturb{.depth_sigma = 0.02, .rotation_sigma = 0.003, .translation_sigma = 0.01};
  ObjectiveCheckOptions check;
  std::string stencil = "four";
  bool no_nudge = false;
};

int run_gradcheck(const SnippetSource& src, const LossWeights& w, const GradcheckArgs& a, std::uint64_t seed) {
  const LoadedSnippet s = load(src, seed);
  SnippetInput x = perturb_snippet(s.input, a.perturb, seed + 1);
  if (!a.no_nudge) x = nudge_off_kinks(x, {}, seed + 2);
  ObjectiveCheckOptions opts = a.check;
  opts.stencil = a.stencil == "two" ? FdStencil::TwoPoint : FdStencil::FourPoint;
  const ObjectiveCheckReport rep = check_objective_gradients(x, w, opts);
  std::cout << "term,coordinates,max_rel_error,worst_index,analytic,numeric,passed\n";
  for (std::size_t i = 0; i < rep.names.size(); ++i) {
    const GradientCheckReport& g = rep.reports[i];
    std::cout << rep.names[i] << ',' << g.coordinates << ',' << num(g.max_relative_error) << ',' << g.worst_index
              << ',' << num(g.worst_analytic) << ',' << num(g.worst_numeric) << ',' << (g.passed ? 1 : 0) << '\n';
  }
  if (!rep.passed) {
    std::cerr << "error: gradient check failed (tolerance " << num(opts.tolerance) << ")\n";
    return kData;
  }
  return 0;
}

struct RefineArgs {
  RefineOptions opts;
  bool pose_only = false;
  double translation_perturbation = 0.05;
};

int run_refine(const SnippetSource& src, const LossWeights& w, const RefineArgs& a, std::uint64_t seed) {
  const LoadedSnippet s = load(src, seed);
  SnippetInput start = s.input;
  if (src.poses_file.empty()) {
    start = perturb_snippet(s.truth, PerturbOptions{.translation_fraction = a.translation_perturbation}, seed + 1);
  }
  RefineOptions opts = a.opts;
  opts.optimize_depth = !a.pose_only;
  const RefineResult r = gradient_descent_refine(start, w, opts);
  std::cout << "step," << kTermHeader << '\n';
  for (std::size_t i = 0; i < r.term_history.size(); ++i) {
    std::cout << i << ',' << term_row(r.term_history[i], r.total_history[i]) << '\n';
  }
  const double e0 = translation_error(start, s.truth);
  const double e1 = translation_error(r.final_state, s.truth);
  std::cerr << "translation error: initial " << num(e0) << " final " << num(e1);
  if (e0 > 0.0) std::cerr << " reduction " << num(100.0 * (1.0 - e1 / e0)) << "%";
  std::cerr << '\n';
  return 0;
}

int run_chain(const std::vector<std::string>& files, const std::string& out) {
  std::vector<Snippet> snippets;
  for (const std::string& f : files) snippets.push_back(Snippet{io::read_kitti_poses(f)});
  const Trajectory traj = chain_snippets(snippets);
  io::write_kitti_poses(out, traj.poses);
  return 0;
}

int run_evaluate(const std::string& est_file, const std::string& gt_file, int length) {
  const Trajectory est{io::read_kitti_poses(est_file)};
  const Trajectory gt{io::read_kitti_poses(gt_file)};
  const AteSummary ate = sequence_ate(est, gt, static_cast<std::size_t>(length));
  const double mape = median_ape(est, gt);
  std::cout << "ate_mean,ate_std,snippets,mape\n"
            << num(ate.mean) << ',' << num(ate.stddev) << ',' << ate.count << ',' << num(mape) << '\n';
  return 0;
}

int run_uncertainty(const std::vector<double>& angles, double sigma, int cells) {
  const auto rows = uncertainty_vs_baseline(angles, sigma, cells);
  std::cout << "angle_deg,largest_eigenvalue,mass\n";
  for (const BaselineSample& r : rows) {
    std::cout << num(r.angle_deg) << ',' << num(r.largest_eigenvalue) << ',' << num(r.mass) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-consistent depth and ego-motion objective toolkit"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 data error, 2 usage error. Reports are comma-separated with a header row.");

  std::uint64_t seed = 0;
  LossWeights weights;
  SnippetSource source;

  auto* synth = app.add_subcommand("synth", "render a synthetic sequence to a directory");
  std::string scenario = "plane", out_dir;
  int width = 64, height = 64, frames = 5, channels = 3, matches = 100, snippet_length = 3;
  synth->add_option("--scenario", scenario, "scenario name")->capture_default_str()->check(CLI::IsMember(scenario_names()));
  synth->add_option("--seed", seed, "random seed")->required();
  synth->add_option("--width", width)->capture_default_str()->check(CLI::Range(8, 4096));
  synth->add_option("--height", height)->capture_default_str()->check(CLI::Range(8, 4096));
  synth->add_option("--frames", frames)->capture_default_str()->check(CLI::Range(3, 100000));
  synth->add_option("--channels", channels)->capture_default_str()->check(CLI::IsMember({1, 3}));
  synth->add_option("--matches", matches, "matches per neighbouring pair")->capture_default_str()->check(CLI::Range(1, 100000));
  synth->add_option("--snippet-length", snippet_length, "frames per snippet_<i>.txt pose file")
      ->capture_default_str()
      ->check(CLI::Range(2, 100000));
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->footer(
      "Writes image_<i>.pfm, image_<i>.pgm (first channel), depth_<i>.pfm, poses.txt (KITTI, camera-to-world), "
      "intrinsics.txt ('fx fy cx cy'), matches_<t>_<s>.txt ('# frames t s' then 'u v u' v'' per line) and "
      "snippet_<i>.txt (KITTI poses of frames i.. relative to frame i).");

  auto* loss = app.add_subcommand("loss", "evaluate the objective on a snippet");
  add_source(loss, source, false);
  add_weights(loss, weights);
  loss->footer(std::string("Columns: ") + kTermHeader +
               ". Unweighted term values and the weighted total. Terms replaced by 0 are reported on stderr.");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every term gradient");
  GradcheckArgs gc;
  add_source(gradcheck, source, true);
  add_weights(gradcheck, weights);
  gradcheck->add_option("--seed", seed, "random seed for scene, perturbation and nudging")->required();
  gradcheck->add_option("--depth-noise", gc.perturb.depth_sigma, "relative depth perturbation sigma")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  gradcheck->add_option("--rotation-noise", gc.perturb.rotation_sigma, "rotation vector perturbation sigma")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  gradcheck->add_option("--translation-noise", gc.perturb.translation_sigma, "translation perturbation sigma")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  gradcheck->add_option("--depth-step", gc.check.depth_step, "relative step for depth pixels")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--pose-step", gc.check.pose_step, "relative step for pose parameters")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--tolerance", gc.check.tolerance, "max relative error")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--stencil", gc.stencil, "central difference stencil")
      ->capture_default_str()
      ->check(CLI::IsMember({"two", "four"}));
  gradcheck->add_flag("--no-nudge", gc.no_nudge, "do not move depths off the kinks of the objective");
  gradcheck->footer(
      "Columns: term,coordinates,max_rel_error,worst_index,analytic,numeric,passed. One row per term "
      "(pixel, ssim, smooth, epi, reproj, depth, multi) and the weighted total. Exits 1 if any row fails.");

  auto* refine = app.add_subcommand("refine", "gradient descent from a perturbed snippet");
  RefineArgs ra;
  add_source(refine, source, true);
  add_weights(refine, weights);
  refine->add_option("--seed", seed, "random seed for scene and perturbation")->required();
  refine->add_option("--steps", ra.opts.steps)->capture_default_str()->check(CLI::PositiveNumber);
  refine->add_option("--lr", ra.opts.learning_rate, "learning rate")->capture_default_str()->check(CLI::NonNegativeNumber);
  refine->add_flag("--pose-only", ra.pose_only, "hold depths fixed");
  refine->add_option("--translation-perturbation", ra.translation_perturbation,
                     "start from translations moved by this fraction of |t| in a random direction (ignored with --poses)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  refine->footer(std::string("Columns: step,") + kTermHeader +
                 ". One row per evaluation (steps + 1). Initial and final translation error go to stderr.");

  auto* chain = app.add_subcommand("chain", "chain overlapping snippet pose files into one trajectory");
  std::vector<std::string> snippet_files;
  std::string chain_out;
  chain->add_option("snippets", snippet_files, "KITTI snippet pose files, each starting one frame after the previous")
      ->required()
      ->check(CLI::ExistingFile);
  chain->add_option("--out", chain_out, "output KITTI pose file")->required();

  auto* evaluate = app.add_subcommand("evaluate", "trajectory errors of an estimate against ground truth");
  std::string est_file, gt_file;
  int ate_length = 3;
  evaluate->add_option("--est", est_file, "estimated KITTI pose file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--gt", gt_file, "ground-truth KITTI pose file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--snippet-length", ate_length, "frames per ATE window")
      ->capture_default_str()
      ->check(CLI::Range(2, 100000));
  evaluate->footer(
      "Columns: ate_mean,ate_std,snippets,mape. ATE is scale-corrected RMSE over every window; mape is the "
      "median position error after similarity alignment of the whole trajectory.");

  auto* uncertainty = app.add_subcommand("uncertainty", "posterior spread of a triangulated point vs baseline angle");
  std::vector<double> angles{5, 15, 30, 45, 60, 90};
  double sigma = 0.005;
  int cells = 512;
  uncertainty->add_option("--angles", angles, "baseline angles in degrees, in (0, 90]")
      ->capture_default_str()
      ->delimiter(',')
      ->check(CLI::Range(0.0, 90.0));
  uncertainty->add_option("--sigma", sigma, "observation noise")->capture_default_str()->check(CLI::PositiveNumber);
  uncertainty->add_option("--cells", cells, "grid cells per axis")->capture_default_str()->check(CLI::Range(2, 8192));
  uncertainty->footer("Columns: angle_deg,largest_eigenvalue,mass.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsage;
  }

  try {
    if (*synth) return run_synth(scenario, seed, width, height, frames, channels, matches, snippet_length, out_dir);
    if (*loss) return run_loss(source, weights);
    if (*gradcheck) return run_gradcheck(source, weights, gc, seed);
    if (*refine) {
      if (source.scenario.empty() && source.dir.empty()) source.scenario = "slanted";
      return run_refine(source, weights, ra, seed);
    }
    if (*chain) return run_chain(snippet_files, chain_out);
    if (*evaluate) return run_evaluate(est_file, gt_file, ate_length);
    if (*uncertainty) return run_uncertainty(angles, sigma, cells);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
