// SPDX-License-Identifier: Apache-2.0
#include "nav/targets/depth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nav/errors.hpp"

namespace nav::targets {

namespace {

double pow10(double x) {
  const double x2 = x * x;
  const double x4 = x2 * x2;
  const double x8 = x4 * x4;
  return x8 * x2;
}

}  // namespace

std::vector<std::uint8_t> depth_to_bytes(std::span<const float> depth, double near_plane,
                                         double far_plane) {
  if (!(near_plane > 0 && far_plane > near_plane)) throw ConfigError("bad depth planes");
  const double inv_near = 1.0 / near_plane;
  const double span = inv_near - 1.0 / far_plane;
  std::vector<std::uint8_t> out(depth.size());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double d = std::max(static_cast<double>(depth[i]), near_plane);
    const double z = std::clamp((inv_near - 1.0 / d) / span, 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * z));
  }
  return out;
}

std::array<double, kDepthPixels> preprocess_depth(std::span<const std::uint8_t> bytes, int height,
                                                  int width) {
  if (height <= 0 || width <= 0 || bytes.size() != static_cast<std::size_t>(height) * width)
    throw ConfigError("preprocess_depth: buffer does not match " + std::to_string(height) + "x" +
                      std::to_string(width));
  const int crop = height / 4;
  const int rows = height - 2 * crop;
  if (rows < kDepthRows || width < kDepthCols)
    throw ConfigError("preprocess_depth: " + std::to_string(height) + "x" +
                      std::to_string(width) + " is smaller than 4x16 after cropping");
  std::array<double, kDepthPixels> out{};
  for (int br = 0; br < kDepthRows; ++br) {
    const int r0 = crop + br * rows / kDepthRows;
    const int r1 = crop + (br + 1) * rows / kDepthRows;
    for (int bc = 0; bc < kDepthCols; ++bc) {
      const int c0 = bc * width / kDepthCols;
      const int c1 = (bc + 1) * width / kDepthCols;
      double sum = 0;
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) sum += bytes[static_cast<std::size_t>(r) * width + c];
      const double mean = sum / ((r1 - r0) * (c1 - c0));
      out[br * kDepthCols + bc] = pow10(mean / 255.0);
    }
  }
  return out;
}

int quantize_depth(double d) {
  if (!(d >= 0.0 && d <= 1.0))
    throw DataError("quantize_depth: " + std::to_string(d) + " outside [0,1]");
  for (int i = 0; i < kDepthBands - 1; ++i)
    if (d < kBandEdges[i + 1]) return i;
  return kDepthBands - 1;
}

DepthTarget make_depth_target(std::span<const std::uint8_t> bytes, int height, int width) {
  const auto grid = preprocess_depth(bytes, height, width);
  DepthTarget t;
  for (int i = 0; i < kDepthPixels; ++i) {
    t.value[i] = static_cast<float>(grid[i]);
    t.band[i] = quantize_depth(grid[i]);
  }
  return t;
}

std::vector<float> normalized_depth_plane(std::span<const std::uint8_t> bytes) {
  std::vector<float> out(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    out[i] = static_cast<float>(pow10(bytes[i] / 255.0));
  return out;
}

}  // namespace nav::targets
