#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geoconsist/core_geometry.hpp"
#include "geoconsist/objective.hpp"
#include "geoconsist/sparse_geometry.hpp"

namespace geoconsist {

/// World-space plane n . X = offset (n unit length).
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

/// Procedural texture: per channel, 0.5 plus a sum of sinusoids of the
/// world position with random directions and phases. Band-limited to
/// wavelengths in [min_wavelength, max_wavelength] (world units) and
/// bounded to [0.05, 0.95] without clipping.
struct TextureSpec {
  std::uint64_t seed = 1;
  int components = 6;
  double min_wavelength = 0.5;
  double max_wavelength = 1.3;
};

/// Camera path poses are camera-to-world: X_world = R X_cam + t. Cameras
/// look along +z with x to the right and y down.
struct SyntheticScene {
  std::vector<Plane> planes;
  std::vector<Sphere> spheres;
  std::vector<Pose> camera_to_world;
  Intrinsics intrinsics;
  int width = 64;
  int height = 64;
  int channels = 3;
  TextureSpec texture;

  void validate() const;
};

/// Nearest positive hit along origin + lambda * dir; nullopt when nothing is hit.
std::optional<double> intersect(const SyntheticScene& scene, const Vec3& origin, const Vec3& dir);

double texture_value(const SyntheticScene& scene, const Vec3& world_point, int channel);

struct RenderResult {
  Image image;
  ScalarGrid depth;   // z along the optical axis
  BinaryGrid valid;   // pixels whose ray hit geometry
};

/// Renders pixel centers at integer coordinates. Throws NoIntersection when
/// a ray misses all geometry unless `allow_misses` is set, in which case the
/// pixel is marked invalid with depth 0 and intensity 0.
RenderResult render_scene(const SyntheticScene& scene, int frame, bool allow_misses = false);

/// Transform taking points in frame `target` camera coordinates to frame `source`.
Pose relative_pose(const SyntheticScene& scene, int target, int source);

struct MatchFileRecord {
  int frame_a = 0;  // target view, pixel p
  int frame_b = 0;  // source view, pixel p'
  MatchSet matches;
};

struct MatchOptions {
  int third_frame = -1;     // additional view the point must be visible in; -1 for none
  double pixel_noise = 0.0; // Gaussian sigma added to p'
};

/// Random surface points seen in frame_a, frame_b and (optionally) a third
/// frame, projected exactly. Throws InsufficientVisibility when fewer than
/// `count` co-visible points are found within 10 * count draws.
MatchFileRecord generate_matches(const SyntheticScene& scene, int frame_a, int frame_b, int count,
                                 std::uint64_t seed, const MatchOptions& opts = {});

/// Built-in scenarios: "plane" (fronto-parallel plane, sideways motion with
/// roll), "plane_sphere" (adds a sphere in front of the plane), "forward"
/// (plane and sphere, motion along the optical axis), "circle" (camera on a
/// circle inside a textured dome). Throws InvalidArgument for other names.
SyntheticScene make_scenario(const std::string& name, std::uint64_t seed, int width = 64, int height = 64,
                             int frames = 5);

std::vector<std::string> scenario_names();

/// Ground-truth snippet centred on `center` (frames center-1, center, center+1),
/// with `match_count` three-view matches per pair.
SnippetInput make_snippet(const SyntheticScene& scene, int center, int match_count, std::uint64_t seed);

}  // namespace geoconsist
