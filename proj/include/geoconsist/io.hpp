#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "geoconsist/core_geometry.hpp"
#include "geoconsist/objective.hpp"
#include "geoconsist/synthetic_scene.hpp"

namespace geoconsist::io {

/// PFM: "Pf" (1 channel) or "PF" (3 channels), little-endian float32, rows
/// stored bottom to top. Throws IoFailure, MalformedLine.
void write_pfm(const std::filesystem::path& path, const Image& image);
Image read_pfm(const std::filesystem::path& path);

/// 8-bit binary PGM of one channel, values mapped linearly from [lo, hi].
void write_pgm(const std::filesystem::path& path, const ScalarGrid& channel, double lo = 0.0, double hi = 1.0);

/// KITTI odometry pose line: 12 reals, row-major 3x4 [R | t].
Pose parse_kitti_line(const std::string& line, int line_number);
std::string format_kitti_line(const Pose& pose);
/// Rotations within 1e-6 of orthonormal are projected back onto SO(3);
/// larger deviations are MalformedLine. Blank lines are skipped.
std::vector<Pose> read_kitti_poses(const std::filesystem::path& path);
void write_kitti_poses(const std::filesystem::path& path, const std::vector<Pose>& poses);

/// Header "# frames A B", then one "u v u' v'" line per match.
void write_matches(const std::filesystem::path& path, const MatchFileRecord& record);
/// Throws MalformedLine (with line number) on bad syntax or, when width and
/// height are positive, on coordinates outside [0, W-1] x [0, H-1].
MatchFileRecord read_matches(const std::filesystem::path& path, int width = 0, int height = 0);

/// Whitespace-separated reals; MalformedLine on anything else.
std::vector<double> parse_reals(const std::string& line, int line_number);

/// Euler angles in radians, R = Rx(rx) Ry(ry) Rz(rz).
Mat3 rotation_from_euler(double rx, double ry, double rz);

/// Two snippet poses (target -> source for pairs 2->1 and 2->3), one per
/// line as "tx ty tz a b c". With `euler` the last three are Euler angles,
/// otherwise a rotation vector. Blank lines and '#' comments are skipped.
std::array<PoseParams, 2> read_relative_poses(const std::filesystem::path& path, bool euler);

/// Single line "fx fy cx cy".
void write_intrinsics(const std::filesystem::path& path, const Intrinsics& k);
Intrinsics read_intrinsics(const std::filesystem::path& path);

/// Sequence directory layout:
///   image_<i>.pfm, image_<i>.pgm, depth_<i>.pfm, poses.txt (camera-to-world),
///   intrinsics.txt, matches_<target>_<source>.txt for each neighbouring pair.
struct SequenceFiles {
  static std::filesystem::path image(const std::filesystem::path& dir, int i);
  static std::filesystem::path preview(const std::filesystem::path& dir, int i);
  static std::filesystem::path depth(const std::filesystem::path& dir, int i);
  static std::filesystem::path poses(const std::filesystem::path& dir);
  static std::filesystem::path intrinsics(const std::filesystem::path& dir);
  static std::filesystem::path matches(const std::filesystem::path& dir, int target, int source);
};

/// Renders every frame of `scene` and writes the full layout.
void write_sequence(const std::filesystem::path& dir, const SyntheticScene& scene, int match_count,
                    std::uint64_t seed);

/// Snippet with frames first, first + 1, first + 2 (target first + 1).
SnippetInput load_snippet(const std::filesystem::path& dir, int first);

}  // namespace geoconsist::io
