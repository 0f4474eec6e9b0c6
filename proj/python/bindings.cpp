#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "geoconsist/depth_consistency.hpp"
#include "geoconsist/io.hpp"
#include "geoconsist/objective.hpp"
#include "geoconsist/pixel_masking.hpp"
#include "geoconsist/synthetic_scene.hpp"
#include "geoconsist/trajectory_eval.hpp"
#include "geoconsist/uncertainty_sim.hpp"
#include "geoconsist/view_synthesis.hpp"

namespace py = pybind11;
using namespace geoconsist;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Mat4 = Eigen::Matrix4d;

ScalarGrid to_grid(const Array& a) {
  if (a.ndim() != 2) throw Error(ErrorCode::InvalidArgument, "expected a 2-D array");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  return ScalarGrid(h, w, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_grid(const ScalarGrid& g) {
  Array out({g.height(), g.width()});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

BinaryGrid to_mask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw Error(ErrorCode::InvalidArgument, "expected a 2-D mask");
  BinaryGrid m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  for (py::ssize_t i = 0; i < a.size(); ++i) m.set(static_cast<std::size_t>(i), a.data()[i]);
  return m;
}

py::array_t<bool> from_mask(const BinaryGrid& m) {
  py::array_t<bool> out({m.height(), m.width()});
  for (std::size_t i = 0; i < m.size(); ++i) out.mutable_data()[i] = m[i];
  return out;
}

// Images travel as (channels, height, width).
Image to_image(const Array& a) {
  if (a.ndim() == 2) return Image{to_grid(a)};
  if (a.ndim() != 3) throw Error(ErrorCode::InvalidArgument, "expected a (C, H, W) array");
  const auto c = a.shape(0), h = a.shape(1), w = a.shape(2);
  Image img;
  for (py::ssize_t k = 0; k < c; ++k) {
    const double* p = a.data() + k * h * w;
    img.emplace_back(static_cast<int>(h), static_cast<int>(w), std::vector<double>(p, p + h * w));
  }
  return img;
}

Array from_image(const Image& img) {
  const int h = img.front().height(), w = img.front().width();
  Array out({static_cast<py::ssize_t>(img.size()), static_cast<py::ssize_t>(h), static_cast<py::ssize_t>(w)});
  double* p = out.mutable_data();
  for (const ScalarGrid& g : img) p = std::copy(g.values().begin(), g.values().end(), p);
  return out;
}

Mat4 to_matrix(const Pose& p) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = p.rotation;
  m.topRightCorner<3, 1>() = p.translation;
  return m;
}

Pose from_matrix(const Mat4& m) { return Pose::from_rt(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()); }

std::vector<Pose> from_matrices(const std::vector<Mat4>& ms) {
  std::vector<Pose> out;
  for (const Mat4& m : ms) out.push_back(from_matrix(m));
  return out;
}

std::vector<Mat4> to_matrices(const std::vector<Pose>& ps) {
  std::vector<Mat4> out;
  for (const Pose& p : ps) out.push_back(to_matrix(p));
  return out;
}

py::dict terms_dict(const TermValues& t, double total) {
  py::dict d;
  d["pixel"] = t.pixel;
  d["ssim"] = t.ssim;
  d["smooth"] = t.smooth;
  d["epi"] = t.epi;
  d["reproj"] = t.reproj;
  d["depth"] = t.depth;
  d["multi"] = t.multi;
  d["total"] = total;
  return d;
}

}  // namespace

PYBIND11_MODULE(_geoconsist, m) {
  m.doc() = "Geometry-consistent photometric objective for depth and ego-motion";

  py::register_exception<Error>(m, "GeoconsistError", PyExc_ValueError);

  py::class_<Intrinsics>(m, "Intrinsics")
      .def(py::init(&Intrinsics::create), py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"))
      .def_readonly("fx", &Intrinsics::fx)
      .def_readonly("fy", &Intrinsics::fy)
      .def_readonly("cx", &Intrinsics::cx)
      .def_readonly("cy", &Intrinsics::cy)
      .def("matrix", &Intrinsics::matrix);

  py::class_<LossWeights>(m, "LossWeights")
      .def(py::init<>())
      .def_readwrite("alpha", &LossWeights::alpha)
      .def_readwrite("beta", &LossWeights::beta)
      .def_readwrite("gamma1", &LossWeights::gamma1)
      .def_readwrite("gamma2", &LossWeights::gamma2)
      .def_readwrite("mu1", &LossWeights::mu1)
      .def_readwrite("mu2", &LossWeights::mu2);

  py::class_<SnippetInput>(m, "Snippet")
      .def_property(
          "images", [](const SnippetInput& s) { return std::vector<Array>{from_image(s.images[0]), from_image(s.images[1]), from_image(s.images[2])}; },
          [](SnippetInput& s, const std::vector<Array>& v) {
            if (v.size() != 3) throw Error(ErrorCode::InvalidArgument, "need three images");
            for (std::size_t i = 0; i < 3; ++i) s.images[i] = to_image(v[i]);
          })
      .def_property(
          "depths", [](const SnippetInput& s) { return std::vector<Array>{from_grid(s.depths[0]), from_grid(s.depths[1]), from_grid(s.depths[2])}; },
          [](SnippetInput& s, const std::vector<Array>& v) {
            if (v.size() != 3) throw Error(ErrorCode::InvalidArgument, "need three depth maps");
            for (std::size_t i = 0; i < 3; ++i) s.depths[i] = to_grid(v[i]);
          })
      .def_property(
          "poses", [](const SnippetInput& s) { return std::vector<Vec6>{s.poses[0].to_vector(), s.poses[1].to_vector()}; },
          [](SnippetInput& s, const std::vector<Vec6>& v) {
            if (v.size() != 2) throw Error(ErrorCode::InvalidArgument, "need two poses");
            for (std::size_t i = 0; i < 2; ++i) s.poses[i] = PoseParams::from_vector(v[i]);
          },
          "target->source poses (2->1, 2->3) as [rx, ry, rz, tx, ty, tz]")
      .def_readwrite("intrinsics", &SnippetInput::intrinsics)
      .def_property(
          "phase", [](const SnippetInput& s) { return s.phase == MaskPhase::Refine ? "refine" : "train"; },
          [](SnippetInput& s, const std::string& p) {
            if (p != "train" && p != "refine") throw Error(ErrorCode::InvalidArgument, "phase is 'train' or 'refine'");
            s.phase = p == "refine" ? MaskPhase::Refine : MaskPhase::Train;
          })
      .def("copy", [](const SnippetInput& s) { return s; });

  m.def("rotation_from_vector", &rotation_from_vector, py::arg("rotation_vector"));
  m.def("rotation_to_vector", &rotation_to_vector, py::arg("rotation"));

  m.def(
      "compute_warp",
      [](const Array& depth, const Vec3& rotation_vector, const Vec3& translation, const Intrinsics& k_t,
         const Intrinsics& k_s) {
        const WarpField w = compute_warp(to_grid(depth), params_to_pose({rotation_vector, translation}), k_t, k_s, false);
        Array coords({w.height, w.width, 2});
        double* p = coords.mutable_data();
        for (const PixelCoord& c : w.coords) {
          *p++ = c.u;
          *p++ = c.v;
        }
        return py::make_tuple(coords, from_mask(w.valid));
      },
      py::arg("depth"), py::arg("rotation_vector"), py::arg("translation"), py::arg("k_t"), py::arg("k_s"),
      "Returns (coords (H, W, 2) as (u, v), valid (H, W)).");

  m.def(
      "bilinear_sample",
      [](const Array& grid, double u, double v) {
        Vec2 j;
        const double value = sample_bilinear(to_grid(grid), u, v, &j);
        return py::make_tuple(value, j);
      },
      py::arg("grid"), py::arg("u"), py::arg("v"), "Returns (value, (d/du, d/dv)).");

  m.def("scenario_names", &scenario_names);
  m.def(
      "synthetic_snippet",
      [](const std::string& scenario, std::uint64_t seed, int width, int height, int channels, int matches) {
        SyntheticScene scene = make_scenario(scenario, seed, width, height, 5);
        scene.channels = channels;
        return make_snippet(scene, 2, matches, seed);
      },
      py::arg("scenario"), py::arg("seed"), py::arg("width") = 64, py::arg("height") = 64, py::arg("channels") = 3,
      py::arg("matches") = 100, "Ground-truth snippet centred on frame 2 of a five-frame scenario.");
  m.def(
      "write_sequence",
      [](const std::string& dir, const std::string& scenario, std::uint64_t seed, int width, int height, int frames,
         int channels, int matches) {
        SyntheticScene scene = make_scenario(scenario, seed, width, height, frames);
        scene.channels = channels;
        io::write_sequence(dir, scene, matches, seed);
      },
      py::arg("dir"), py::arg("scenario"), py::arg("seed"), py::arg("width") = 64, py::arg("height") = 64,
      py::arg("frames") = 5, py::arg("channels") = 3, py::arg("matches") = 100);
  m.def("load_snippet", [](const std::string& dir, int first) { return io::load_snippet(dir, first); }, py::arg("dir"),
        py::arg("first") = 0);

  m.def(
      "total_loss",
      [](const SnippetInput& s, const LossWeights& w, bool gradients) {
        const LossReport r = total_loss(s, w, EvalOptions{.gradients = gradients});
        py::dict d = terms_dict(r.terms, r.total);
        py::list degraded;
        for (const DegradedTerm& t : r.degraded) degraded.append(py::make_tuple(t.term, t.source, std::string(to_string(t.reason))));
        d["degraded"] = degraded;
        if (gradients) {
          d["grad_depths"] = std::vector<Array>{from_grid(r.grad_depths[0]), from_grid(r.grad_depths[1]), from_grid(r.grad_depths[2])};
          d["grad_poses"] = std::vector<Vec6>{r.grad_poses[0], r.grad_poses[1]};
        }
        return d;
      },
      py::arg("snippet"), py::arg("weights") = LossWeights{}, py::arg("gradients") = false,
      "Term values, weighted total and (optionally) gradients w.r.t. depths and [rx, ry, rz, tx, ty, tz].");

  m.def(
      "perturb_snippet",
      [](const SnippetInput& s, std::uint64_t seed, double depth_sigma, double rotation_sigma, double translation_sigma,
         double translation_fraction) {
        return perturb_snippet(s, {depth_sigma, rotation_sigma, translation_sigma, translation_fraction}, seed);
      },
      py::arg("snippet"), py::arg("seed"), py::arg("depth_sigma") = 0.0, py::arg("rotation_sigma") = 0.0,
      py::arg("translation_sigma") = 0.0, py::arg("translation_fraction") = 0.0);
  m.def("nudge_off_kinks", [](const SnippetInput& s, std::uint64_t seed) { return nudge_off_kinks(s, {}, seed); },
        py::arg("snippet"), py::arg("seed") = 1);
  m.def("translation_error", &translation_error, py::arg("a"), py::arg("b"));

  m.def(
      "check_gradients",
      [](const SnippetInput& s, const LossWeights& w, double depth_step, double pose_step, double tolerance) {
        ObjectiveCheckOptions o;
        o.depth_step = depth_step;
        o.pose_step = pose_step;
        o.tolerance = tolerance;
        const ObjectiveCheckReport r = check_objective_gradients(s, w, o);
        py::list rows;
        for (std::size_t i = 0; i < r.names.size(); ++i) {
          py::dict d;
          d["term"] = r.names[i];
          d["coordinates"] = r.reports[i].coordinates;
          d["max_rel_error"] = r.reports[i].max_relative_error;
          d["passed"] = r.reports[i].passed;
          rows.append(d);
        }
        return rows;
      },
      py::arg("snippet"), py::arg("weights") = LossWeights{}, py::arg("depth_step") = 1e-4, py::arg("pose_step") = 1e-6,
      py::arg("tolerance") = 1e-4);

  m.def(
      "refine",
      [](const SnippetInput& s, const LossWeights& w, int steps, double learning_rate, bool optimize_depth,
         bool optimize_pose) {
        const RefineResult r = gradient_descent_refine(s, w, {steps, learning_rate, optimize_depth, optimize_pose});
        return py::make_tuple(r.final_state, r.total_history);
      },
      py::arg("snippet"), py::arg("weights") = LossWeights{}, py::arg("steps") = 200, py::arg("learning_rate") = 1e-4,
      py::arg("optimize_depth") = true, py::arg("optimize_pose") = true, "Returns (final snippet, total per evaluation).");

  m.def(
      "depth_consistency",
      [](const Array& target, const Array& synthesized, py::object mask) {
        const ScalarGrid t = to_grid(target);
        const BinaryGrid mk = mask.is_none() ? BinaryGrid(t.height(), t.width(), true)
                                             : to_mask(mask.cast<py::array_t<bool, py::array::c_style | py::array::forcecast>>());
        return depth_consistency_term(t, to_grid(synthesized), mk).value;
      },
      py::arg("target"), py::arg("synthesized"), py::arg("mask") = py::none(),
      "Scale-aligned depth discrepancy between a target and a synthesized depth map.");

  m.def(
      "nearest_rank_percentile", [](const std::vector<double>& v, double q) { return nearest_rank_percentile(v, q); },
      py::arg("values"), py::arg("q"));

  m.def(
      "uncertainty_vs_baseline",
      [](const std::vector<double>& angles, double sigma, int cells) {
        std::vector<py::tuple> out;
        for (const BaselineSample& s : uncertainty_vs_baseline(angles, sigma, cells))
          out.push_back(py::make_tuple(s.angle_deg, s.largest_eigenvalue, s.mass));
        return out;
      },
      py::arg("angles") = std::vector<double>{5, 15, 30, 45, 60, 90}, py::arg("sigma") = 0.005, py::arg("cells") = 512,
      "Rows of (angle_deg, largest_eigenvalue, mass).");

  m.def("read_kitti_poses", [](const std::string& path) { return to_matrices(io::read_kitti_poses(path)); },
        py::arg("path"), "Camera-to-world poses as 4x4 matrices.");
  m.def("write_kitti_poses",
        [](const std::string& path, const std::vector<Mat4>& poses) { io::write_kitti_poses(path, from_matrices(poses)); },
        py::arg("path"), py::arg("poses"));
  m.def(
      "chain_snippets",
      [](const std::vector<std::vector<Mat4>>& snippets) {
        std::vector<Snippet> s;
        for (const auto& p : snippets) s.push_back(Snippet{from_matrices(p)});
        return to_matrices(chain_snippets(s).poses);
      },
      py::arg("snippets"));
  m.def(
      "slice_snippet",
      [](const std::vector<Mat4>& traj, std::size_t first, std::size_t length) {
        return to_matrices(slice_snippet(Trajectory{from_matrices(traj)}, first, length).poses);
      },
      py::arg("trajectory"), py::arg("first"), py::arg("length"));
  m.def(
      "median_ape",
      [](const std::vector<Mat4>& est, const std::vector<Mat4>& gt) {
        return median_ape(Trajectory{from_matrices(est)}, Trajectory{from_matrices(gt)});
      },
      py::arg("est"), py::arg("gt"));
  m.def(
      "sequence_ate",
      [](const std::vector<Mat4>& est, const std::vector<Mat4>& gt, std::size_t length) {
        const AteSummary a = sequence_ate(Trajectory{from_matrices(est)}, Trajectory{from_matrices(gt)}, length);
        return py::make_tuple(a.mean, a.stddev, a.count);
      },
      py::arg("est"), py::arg("gt"), py::arg("length") = 3, "Returns (mean, stddev, windows).");
}
