#include "geoconsist/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Geometry>

namespace geoconsist::io {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  return in;
}

[[noreturn]] void malformed(const fs::path& path, int line, const std::string& what) {
  throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(line) + ": " + what);
}

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

bool is_blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

void write_pfm(const fs::path& path, const Image& image) {
  if (image.size() != 1 && image.size() != 3) {
    throw Error(ErrorCode::InvalidArgument, "PFM holds 1 or 3 channels");
  }
  const int h = image[0].height();
  const int w = image[0].width();
  for (const ScalarGrid& c : image) {
    if (!c.same_shape(image[0])) throw Error(ErrorCode::InvalidArgument, "channel shapes differ");
  }
  std::ofstream out = open_out(path, true);
  out << (image.size() == 3 ? "PF" : "Pf") << '\n' << w << ' ' << h << '\n' << "-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(w) * image.size());
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < image.size(); ++c) {
        row[static_cast<std::size_t>(x) * image.size() + c] = static_cast<float>(image[c](y, x));
      }
    }
    if constexpr (std::endian::native == std::endian::big) {
      for (float& f : row) f = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(f)));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

Image read_pfm(const fs::path& path) {
  std::ifstream in = open_in(path, true);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (!in || (magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || scale == 0.0) {
    malformed(path, 1, "bad PFM header");
  }
  in.get();  // single whitespace after the scale
  const std::size_t channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  Image image(channels, ScalarGrid(h, w, 0.0));
  std::vector<float> row(static_cast<std::size_t>(w) * channels);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw Error(ErrorCode::IoFailure, "truncated PFM data in " + path.string());
    const bool swap = little != (std::endian::native == std::endian::little);
    for (int x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        float f = row[static_cast<std::size_t>(x) * channels + c];
        if (swap) f = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(f)));
        image[c](y, x) = f;
      }
    }
  }
  return image;
}

void write_pgm(const fs::path& path, const ScalarGrid& channel, double lo, double hi) {
  if (!(hi > lo)) throw Error(ErrorCode::InvalidArgument, "PGM range must be non-empty");
  std::ofstream out = open_out(path, true);
  out << "P5\n" << channel.width() << ' ' << channel.height() << "\n255\n";
  std::vector<unsigned char> bytes(channel.size());
  for (std::size_t i = 0; i < channel.size(); ++i) {
    const double t = std::clamp((channel[i] - lo) / (hi - lo), 0.0, 1.0);
    bytes[i] = static_cast<unsigned char>(std::lround(255.0 * t));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

std::vector<double> parse_reals(const std::string& line, int line_number) {
  std::istringstream ss(line);
  std::vector<double> v;
  std::string tok;
  while (ss >> tok) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(x)) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_number) + ": bad number '" + tok + "'");
    }
    v.push_back(x);
  }
  return v;
}

Pose parse_kitti_line(const std::string& line, int line_number) {
  const std::vector<double> v = parse_reals(line, line_number);
  if (v.size() != 12) {
    throw Error(ErrorCode::MalformedLine,
                "line " + std::to_string(line_number) + ": expected 12 values, got " + std::to_string(v.size()));
  }
  Mat3 r;
  Vec3 t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = v[static_cast<std::size_t>(4 * i + j)];
    t[i] = v[static_cast<std::size_t>(4 * i + 3)];
  }
  if (rotation_error(r) > 1e-6) {
    throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_number) + ": rotation is not orthonormal");
  }
  return {project_to_rotation(r), t};
}

std::string format_kitti_line(const Pose& p) {
  std::ostringstream ss;
  ss << std::scientific << std::setprecision(9);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) ss << p.rotation(i, j) << ' ';
    ss << p.translation[i] << (i < 2 ? " " : "");
  }
  return ss.str();
}

std::vector<Pose> read_kitti_poses(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<Pose> poses;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (is_blank(line)) continue;
    try {
      poses.push_back(parse_kitti_line(line, n));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": " + e.what());
    }
  }
  return poses;
}

void write_kitti_poses(const fs::path& path, const std::vector<Pose>& poses) {
  std::ofstream out = open_out(path);
  for (const Pose& p : poses) out << format_kitti_line(p) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

void write_matches(const fs::path& path, const MatchFileRecord& rec) {
  std::ofstream out = open_out(path);
  out << "# frames " << rec.frame_a << ' ' << rec.frame_b << '\n' << std::setprecision(17);
  for (const Match& m : rec.matches) out << m.p.u << ' ' << m.p.v << ' ' << m.p_prime.u << ' ' << m.p_prime.v << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

MatchFileRecord read_matches(const fs::path& path, int width, int height) {
  std::ifstream in = open_in(path);
  MatchFileRecord rec;
  std::string line;
  int n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++n;
    if (is_blank(line)) continue;
    std::istringstream ss(line);
    if (!header) {
      std::string hash, word;
      if (!(ss >> hash >> word >> rec.frame_a >> rec.frame_b) || hash != "#" || word != "frames") {
        malformed(path, n, "expected '# frames A B'");
      }
      header = true;
      continue;
    }
    double c[4];
    std::string extra;
    if (!(ss >> c[0] >> c[1] >> c[2] >> c[3]) || (ss >> extra)) malformed(path, n, "expected 'u v u' v''");
    for (double x : c) {
      if (!std::isfinite(x)) malformed(path, n, "non-finite coordinate");
    }
    if (width > 0 && height > 0) {
      auto in_bounds = [&](double u, double v) { return u >= 0.0 && u <= width - 1 && v >= 0.0 && v <= height - 1; };
      if (!in_bounds(c[0], c[1]) || !in_bounds(c[2], c[3])) malformed(path, n, "coordinate outside the image");
    }
    rec.matches.push_back({{c[0], c[1]}, {c[2], c[3]}});
  }
  if (!header) malformed(path, n, "missing '# frames A B' header");
  return rec;
}

Mat3 rotation_from_euler(double rx, double ry, double rz) {
  const Eigen::AngleAxisd ax(rx, Vec3::UnitX()), ay(ry, Vec3::UnitY()), az(rz, Vec3::UnitZ());
  return (ax * ay * az).toRotationMatrix();
}

std::array<PoseParams, 2> read_relative_poses(const fs::path& path, bool euler) {
  std::ifstream in = open_in(path);
  std::array<PoseParams, 2> out;
  std::string line;
  int line_number = 0;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (is_blank(line) || line.front() == '#') continue;
    std::vector<double> v;
    try {
      v = parse_reals(line, line_number);
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedLine, path.string() + ": " + e.what());
    }
    if (v.size() != 6) malformed(path, line_number, "expected 6 values, got " + std::to_string(v.size()));
    if (n == 2) malformed(path, line_number, "more than two poses");
    const Vec3 t{v[0], v[1], v[2]};
    out[n].translation = t;
    out[n].rotation_vector = euler ? rotation_to_vector(rotation_from_euler(v[3], v[4], v[5])) : Vec3{v[3], v[4], v[5]};
    ++n;
  }
  if (n != 2) malformed(path, line_number, "expected two poses, got " + std::to_string(n));
  return out;
}

void write_intrinsics(const fs::path& path, const Intrinsics& k) {
  std::ofstream out = open_out(path);
  out << std::setprecision(17) << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

Intrinsics read_intrinsics(const fs::path& path) {
  std::ifstream in = open_in(path);
  double fx, fy, cx, cy;
  if (!(in >> fx >> fy >> cx >> cy)) malformed(path, 1, "expected 'fx fy cx cy'");
  try {
    return Intrinsics::create(fx, fy, cx, cy);
  } catch (const Error& e) {
    malformed(path, 1, e.what());
  }
}

fs::path SequenceFiles::image(const fs::path& dir, int i) { return dir / ("image_" + std::to_string(i) + ".pfm"); }
fs::path SequenceFiles::preview(const fs::path& dir, int i) { return dir / ("image_" + std::to_string(i) + ".pgm"); }
fs::path SequenceFiles::depth(const fs::path& dir, int i) { return dir / ("depth_" + std::to_string(i) + ".pfm"); }
fs::path SequenceFiles::poses(const fs::path& dir) { return dir / "poses.txt"; }
fs::path SequenceFiles::intrinsics(const fs::path& dir) { return dir / "intrinsics.txt"; }
fs::path SequenceFiles::matches(const fs::path& dir, int target, int source) {
  return dir / ("matches_" + std::to_string(target) + "_" + std::to_string(source) + ".txt");
}

void write_sequence(const fs::path& dir, const SyntheticScene& scene, int match_count, std::uint64_t seed) {
  scene.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  const int n = static_cast<int>(scene.camera_to_world.size());
  for (int i = 0; i < n; ++i) {
    const RenderResult r = render_scene(scene, i);
    write_pfm(SequenceFiles::image(dir, i), r.image.size() == 3 || r.image.size() == 1 ? r.image : Image{r.image[0]});
    write_pgm(SequenceFiles::preview(dir, i), r.image[0]);
    write_pfm(SequenceFiles::depth(dir, i), Image{r.depth});
  }
  write_kitti_poses(SequenceFiles::poses(dir), scene.camera_to_world);
  write_intrinsics(SequenceFiles::intrinsics(dir), scene.intrinsics);
  for (int c = 1; c + 1 < n; ++c) {
    const std::uint64_t s = seed + 2 * static_cast<std::uint64_t>(c);
    write_matches(SequenceFiles::matches(dir, c, c - 1), generate_matches(scene, c, c - 1, match_count, s, {c + 1, 0.0}));
    write_matches(SequenceFiles::matches(dir, c, c + 1),
                  generate_matches(scene, c, c + 1, match_count, s + 1, {c - 1, 0.0}));
  }
}

SnippetInput load_snippet(const fs::path& dir, int first) {
  if (first < 0) throw Error(ErrorCode::InvalidArgument, "first frame must be >= 0");
  const std::vector<Pose> c2w = read_kitti_poses(SequenceFiles::poses(dir));
  if (first + 2 >= static_cast<int>(c2w.size())) {
    throw Error(ErrorCode::InvalidArgument, "sequence has no frames " + std::to_string(first) + ".." +
                                                std::to_string(first + 2));
  }
  SnippetInput in;
  in.intrinsics = read_intrinsics(SequenceFiles::intrinsics(dir));
  for (int i = 0; i < 3; ++i) {
    in.images[static_cast<std::size_t>(i)] = read_pfm(SequenceFiles::image(dir, first + i));
    Image d = read_pfm(SequenceFiles::depth(dir, first + i));
    if (d.size() != 1) throw Error(ErrorCode::MalformedLine, "depth file must have one channel");
    in.depths[static_cast<std::size_t>(i)] = std::move(d[0]);
  }
  const int c = first + 1;
  const auto rel = [&](int target, int source) {
    return pose_to_params(compose(invert(c2w[static_cast<std::size_t>(source)]), c2w[static_cast<std::size_t>(target)]));
  };
  in.poses[0] = rel(c, c - 1);
  in.poses[1] = rel(c, c + 1);
  const int w = in.depths[1].width();
  const int h = in.depths[1].height();
  for (int j = 0; j < 2; ++j) {
    const int src = j == 0 ? c - 1 : c + 1;
    const fs::path p = SequenceFiles::matches(dir, c, src);
    MatchFileRecord rec = read_matches(p, w, h);
    if (rec.frame_a != c || rec.frame_b != src) malformed(p, 1, "header frames do not match the file name");
    in.matches[static_cast<std::size_t>(j)] = std::move(rec.matches);
  }
  in.validate();
  return in;
}

}  // namespace geoconsist::io
