#include "geoconsist/synthetic_scene.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

namespace geoconsist {

void SyntheticScene::validate() const {
  if (width < 2 || height < 2) throw Error(ErrorCode::InvalidArgument, "scene image must be at least 2x2");
  if (channels < 1) throw Error(ErrorCode::InvalidArgument, "scene needs at least one channel");
  if (planes.empty() && spheres.empty()) throw Error(ErrorCode::InvalidArgument, "scene has no geometry");
  if (camera_to_world.empty()) throw Error(ErrorCode::InvalidArgument, "scene has no camera path");
  if (texture.components < 1 || !(texture.min_wavelength > 0.0) ||
      !(texture.max_wavelength >= texture.min_wavelength)) {
    throw Error(ErrorCode::InvalidArgument, "invalid texture parameters");
  }
  for (const Sphere& s : spheres) {
    if (!(s.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "sphere radius must be positive");
  }
}

std::optional<double> intersect(const SyntheticScene& scene, const Vec3& o, const Vec3& d) {
  constexpr double kMin = 1e-6;
  std::optional<double> best;
  auto consider = [&](double lambda) {
    if (lambda > kMin && (!best || lambda < *best)) best = lambda;
  };
  for (const Plane& p : scene.planes) {
    const double denom = p.normal.dot(d);
    if (std::abs(denom) < 1e-12) continue;
    consider((p.offset - p.normal.dot(o)) / denom);
  }
  for (const Sphere& s : scene.spheres) {
    const Vec3 oc = o - s.center;
    const double a = d.squaredNorm();
    const double b = 2.0 * oc.dot(d);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    const double l0 = (-b - sq) / (2.0 * a);
    const double l1 = (-b + sq) / (2.0 * a);
    consider(l0 > kMin ? l0 : l1);
  }
  return best;
}

namespace {

struct Wave {
  Vec3 k;  // direction * 2 pi / wavelength
  double amplitude;
  std::vector<double> phase;  // per channel
};

std::vector<Wave> make_waves(const SyntheticScene& scene) {
  std::mt19937_64 rng(scene.texture.seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = scene.texture.components;
  std::vector<Wave> waves;
  for (int i = 0; i < n; ++i) {
    Vec3 dir{gauss(rng), gauss(rng), gauss(rng)};
    dir.normalize();
    const double lambda =
        scene.texture.min_wavelength + (scene.texture.max_wavelength - scene.texture.min_wavelength) * unit(rng);
    Wave w{dir * (2.0 * std::numbers::pi / lambda), 0.45 / n, {}};
    for (int c = 0; c < scene.channels; ++c) w.phase.push_back(2.0 * std::numbers::pi * unit(rng));
    waves.push_back(std::move(w));
  }
  return waves;
}

double eval_waves(const std::vector<Wave>& waves, const Vec3& x, int channel) {
  double v = 0.5;
  for (const Wave& w : waves) v += w.amplitude * std::sin(w.k.dot(x) + w.phase[static_cast<std::size_t>(channel)]);
  return v;
}

}  // namespace

double texture_value(const SyntheticScene& scene, const Vec3& x, int channel) {
  if (channel < 0 || channel >= scene.channels) throw Error(ErrorCode::InvalidArgument, "channel out of range");
  return eval_waves(make_waves(scene), x, channel);
}

RenderResult render_scene(const SyntheticScene& scene, int frame, bool allow_misses) {
  scene.validate();
  if (frame < 0 || frame >= static_cast<int>(scene.camera_to_world.size())) {
    throw Error(ErrorCode::InvalidArgument, "frame index out of range");
  }
  const std::vector<Wave> waves = make_waves(scene);
  const Pose& c2w = scene.camera_to_world[static_cast<std::size_t>(frame)];
  RenderResult out;
  out.depth = ScalarGrid(scene.height, scene.width, 0.0);
  out.valid = BinaryGrid(scene.height, scene.width, false);
  out.image.assign(static_cast<std::size_t>(scene.channels), ScalarGrid(scene.height, scene.width, 0.0));
  for (int v = 0; v < scene.height; ++v) {
    for (int u = 0; u < scene.width; ++u) {
      const Vec3 ray = scene.intrinsics.ray({static_cast<double>(u), static_cast<double>(v)});
      const Vec3 dir = c2w.rotation * ray;
      const auto hit = intersect(scene, c2w.translation, dir);
      if (!hit) {
        if (!allow_misses) {
          throw Error(ErrorCode::NoIntersection,
                      "ray through pixel (" + std::to_string(u) + ", " + std::to_string(v) + ") misses the scene");
        }
        continue;
      }
      const Vec3 x = c2w.translation + *hit * dir;
      out.depth(v, u) = *hit;  // ray has unit z, so lambda is the depth
      out.valid.set(v, u, true);
      for (int c = 0; c < scene.channels; ++c) out.image[static_cast<std::size_t>(c)](v, u) = eval_waves(waves, x, c);
    }
  }
  return out;
}

Pose relative_pose(const SyntheticScene& scene, int target, int source) {
  const int n = static_cast<int>(scene.camera_to_world.size());
  if (target < 0 || target >= n || source < 0 || source >= n) {
    throw Error(ErrorCode::InvalidArgument, "frame index out of range");
  }
  return compose(invert(scene.camera_to_world[static_cast<std::size_t>(source)]),
                 scene.camera_to_world[static_cast<std::size_t>(target)]);
}

namespace {

// Projects a world point into `frame`; returns nullopt when it is behind the
// camera, outside the image, or hidden behind other geometry.
std::optional<PixelCoord> visible_projection(const SyntheticScene& scene, int frame, const Vec3& x) {
  const Pose& c2w = scene.camera_to_world[static_cast<std::size_t>(frame)];
  const Vec3 xc = c2w.rotation.transpose() * (x - c2w.translation);
  if (xc.z() <= 1e-6) return std::nullopt;
  const PixelCoord p = project(xc, scene.intrinsics);
  if (p.u < 0.0 || p.u > scene.width - 1 || p.v < 0.0 || p.v > scene.height - 1) return std::nullopt;
  const auto hit = intersect(scene, c2w.translation, c2w.rotation * (xc / xc.z()));
  if (!hit || std::abs(*hit - xc.z()) > 1e-7 * xc.z()) return std::nullopt;
  return p;
}

}  // namespace

MatchFileRecord generate_matches(const SyntheticScene& scene, int frame_a, int frame_b, int count,
                                 std::uint64_t seed, const MatchOptions& opts) {
  scene.validate();
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "match count must be at least 1");
  const int n = static_cast<int>(scene.camera_to_world.size());
  for (int f : {frame_a, frame_b}) {
    if (f < 0 || f >= n) throw Error(ErrorCode::InvalidArgument, "frame index out of range");
  }
  if (opts.third_frame >= n) throw Error(ErrorCode::InvalidArgument, "third frame out of range");
  if (!(opts.pixel_noise >= 0.0)) throw Error(ErrorCode::InvalidArgument, "pixel noise must be >= 0");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pu(0.0, scene.width - 1.0);
  std::uniform_real_distribution<double> pv(0.0, scene.height - 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Pose& c2w = scene.camera_to_world[static_cast<std::size_t>(frame_a)];

  MatchFileRecord rec{frame_a, frame_b, {}};
  for (int draw = 0; draw < 10 * count && static_cast<int>(rec.matches.size()) < count; ++draw) {
    const PixelCoord p{pu(rng), pv(rng)};
    const Vec3 dir = c2w.rotation * scene.intrinsics.ray(p);
    const auto hit = intersect(scene, c2w.translation, dir);
    if (!hit) continue;
    const Vec3 x = c2w.translation + *hit * dir;
    const auto q = visible_projection(scene, frame_b, x);
    if (!q) continue;
    if (opts.third_frame >= 0 && !visible_projection(scene, opts.third_frame, x)) continue;
    PixelCoord qn = *q;
    if (opts.pixel_noise > 0.0) {
      qn.u += opts.pixel_noise * noise(rng);
      qn.v += opts.pixel_noise * noise(rng);
    }
    rec.matches.push_back({p, qn});
  }
  if (static_cast<int>(rec.matches.size()) < count) {
    throw Error(ErrorCode::InsufficientVisibility, "found only " + std::to_string(rec.matches.size()) + " of " +
                                                       std::to_string(count) + " co-visible points");
  }
  return rec;
}

namespace {

Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }
Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }

}  // namespace

std::vector<std::string> scenario_names() { return {"plane", "plane_sphere", "slanted", "forward", "circle"}; }

SyntheticScene make_scenario(const std::string& name, std::uint64_t seed, int width, int height, int frames) {
  if (frames < 3) throw Error(ErrorCode::InvalidArgument, "a scenario needs at least 3 frames");
  if (width < 8 || height < 8) throw Error(ErrorCode::InvalidArgument, "scenario images must be at least 8x8");
  SyntheticScene s;
  s.width = width;
  s.height = height;
  const double f = 0.9375 * std::max(width, height);
  s.intrinsics = Intrinsics::create(f, f, (width - 1) / 2.0, (height - 1) / 2.0);
  s.texture.seed = seed;

  double ref_depth = 4.0;
  const double mid = (frames - 1) / 2.0;
  if (name == "plane" || name == "plane_sphere") {
    // Sideways translation and roll keep every point's depth unchanged.
    const double b = 2.25 * ref_depth / f;
    s.planes.push_back({Vec3::UnitZ(), name == "plane" ? ref_depth : 5.0});
    if (name == "plane_sphere") s.spheres.push_back({Vec3{0.1, 0.05, 3.4}, 0.6});
    for (int i = 0; i < frames; ++i) {
      const double k = i - mid;
      s.camera_to_world.push_back(
          Pose::from_rt(rot_z(0.01 * k), Vec3{b * k, 0.3 * b * std::sin(0.9 * k), 0.0}));
    }
  } else if (name == "slanted") {
    // Plane tilted about the x axis: depth runs from about 2.5 at the bottom
    // row to 8 at the top for a 0.9375 focal ratio.
    ref_depth = 5.0;
    const double b = 2.25 * 4.0 / f;
    s.planes.push_back({Vec3{0.0, 0.703, 0.711}.normalized(), 2.71});
    for (int i = 0; i < frames; ++i) {
      const double k = i - mid;
      s.camera_to_world.push_back(
          Pose::from_rt(rot_z(0.01 * k), Vec3{b * k, 0.3 * b * std::sin(0.9 * k), 0.0}));
    }
  } else if (name == "forward") {
    ref_depth = 5.0;
    s.planes.push_back({Vec3::UnitZ(), 7.0});
    s.spheres.push_back({Vec3{0.5, 0.3, 4.5}, 0.6});
    for (int i = 0; i < frames; ++i) {
      const double k = i - mid;
      s.camera_to_world.push_back(Pose::from_rt(rot_y(0.005 * k), Vec3{0.02 * k, 0.0, 0.15 * k}));
    }
  } else if (name == "circle") {
    ref_depth = 30.0;
    s.spheres.push_back({Vec3::Zero(), 40.0});
    const double r = 3.0;
    for (int i = 0; i < frames; ++i) {
      const double theta = 0.1 * i;
      s.camera_to_world.push_back(
          Pose::from_rt(rot_y(-theta), Vec3{r * std::cos(theta) - r, 0.2 * std::sin(2.0 * theta), r * std::sin(theta)}));
    }
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + name + "'");
  }
  const double footprint = ref_depth / f;
  s.texture.min_wavelength = 8.0 * footprint;
  s.texture.max_wavelength = 20.0 * footprint;
  s.validate();
  return s;
}

SnippetInput make_snippet(const SyntheticScene& scene, int center, int match_count, std::uint64_t seed) {
  const int n = static_cast<int>(scene.camera_to_world.size());
  if (center < 1 || center + 1 >= n) throw Error(ErrorCode::InvalidArgument, "snippet centre needs both neighbours");
  SnippetInput in;
  for (int i = 0; i < 3; ++i) {
    RenderResult r = render_scene(scene, center - 1 + i);
    in.images[static_cast<std::size_t>(i)] = std::move(r.image);
    in.depths[static_cast<std::size_t>(i)] = std::move(r.depth);
  }
  in.poses[0] = pose_to_params(relative_pose(scene, center, center - 1));
  in.poses[1] = pose_to_params(relative_pose(scene, center, center + 1));
  in.matches[0] = generate_matches(scene, center, center - 1, match_count, seed, {center + 1, 0.0}).matches;
  in.matches[1] = generate_matches(scene, center, center + 1, match_count, seed + 1, {center - 1, 0.0}).matches;
  in.intrinsics = scene.intrinsics;
  return in;
}

}  // namespace geoconsist
