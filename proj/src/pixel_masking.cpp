#include "geoconsist/pixel_masking.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace geoconsist {

void MaskConfig::validate() const {
  auto ok = [](double q) { return q > 0.0 && q < 100.0; };
  if (!ok(error_percentile) || !ok(gradient_percentile)) {
    throw Error(ErrorCode::InvalidArgument, "mask percentiles must lie in (0, 100)");
  }
}

double nearest_rank_percentile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::EmptyMask, "percentile of an empty set");
  std::vector<double> sorted(values.begin(), values.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  return sorted[rank - 1];
}

namespace {

std::vector<double> valid_values(const ScalarGrid& grid, const BinaryGrid& valid) {
  if (!valid.same_shape(grid)) throw Error(ErrorCode::InvalidArgument, "mask and map shapes differ");
  std::vector<double> out;
  out.reserve(valid.count());
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (valid[i]) out.push_back(grid[i]);
  if (out.empty()) throw Error(ErrorCode::EmptyMask, "no valid pixels to threshold");
  return out;
}

}  // namespace

BinaryGrid error_mask(const ScalarGrid& error_map, const BinaryGrid& valid, const MaskConfig& cfg) {
  cfg.validate();
  const double threshold = nearest_rank_percentile(valid_values(error_map, valid), cfg.error_percentile);
  BinaryGrid out(valid.height(), valid.width());
  for (std::size_t i = 0; i < error_map.size(); ++i) out.set(i, valid[i] && error_map[i] <= threshold);
  return out;
}

ScalarGrid gradient_magnitude(const Image& image) {
  if (image.empty()) throw Error(ErrorCode::InvalidArgument, "gradient of an image without channels");
  const int h = image[0].height();
  const int w = image[0].width();
  ScalarGrid out(h, w, 0.0);
  for (const ScalarGrid& ch : image) {
    if (!ch.same_shape(image[0])) throw Error(ErrorCode::InvalidArgument, "channel shapes differ");
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double gx = x + 1 < w ? ch(y, x + 1) - ch(y, x) : 0.0;
        const double gy = y + 1 < h ? ch(y + 1, x) - ch(y, x) : 0.0;
        out(y, x) += std::sqrt(gx * gx + gy * gy);
      }
    }
  }
  for (double& v : out.values()) v /= static_cast<double>(image.size());
  return out;
}

BinaryGrid gradient_mask(const Image& image, const BinaryGrid& valid, const MaskConfig& cfg) {
  cfg.validate();
  const ScalarGrid mag = gradient_magnitude(image);
  const double threshold = nearest_rank_percentile(valid_values(mag, valid), cfg.gradient_percentile);
  BinaryGrid out(valid.height(), valid.width());
  for (std::size_t i = 0; i < mag.size(); ++i) out.set(i, valid[i] && mag[i] > threshold);
  return out;
}

BinaryGrid composite_mask(const BinaryGrid& error_m, const BinaryGrid& gradient_m) {
  if (!error_m.same_shape(gradient_m)) throw Error(ErrorCode::InvalidArgument, "mask shapes differ");
  BinaryGrid out(error_m.height(), error_m.width());
  for (std::size_t i = 0; i < error_m.size(); ++i) out.set(i, error_m[i] && gradient_m[i]);
  return out;
}

}  // namespace geoconsist
