// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace nav::targets {

inline constexpr int kDepthRows = 4;
inline constexpr int kDepthCols = 16;
inline constexpr int kDepthPixels = kDepthRows * kDepthCols;
inline constexpr int kDepthBands = 8;

// Band edges over normalised depth.
inline constexpr std::array<double, kDepthBands + 1> kBandEdges = {
    0.0, 0.05, 0.175, 0.3, 0.425, 0.55, 0.675, 0.8, 1.0};

// 4 x 16 targets, row-major.
struct DepthTarget {
  std::array<float, kDepthPixels> value{};  // regression target in [0,1]
  std::array<int, kDepthPixels> band{};     // classification target
};

// Encodes perpendicular distances as a perspective Z-buffer in bytes:
// 255 * (1/near - 1/d) / (1/near - 1/far), clamped, far plane -> 255.
std::vector<std::uint8_t> depth_to_bytes(std::span<const float> depth, double near_plane,
                                         double far_plane);

// Crops the top and bottom quarter of the rows, average-pools the rest into
// 4 x 16 blocks, then maps each pooled byte b to (b / 255)^10.
std::array<double, kDepthPixels> preprocess_depth(std::span<const std::uint8_t> bytes, int height,
                                                  int width);

// Band i when d in [edge_i, edge_{i+1}); band 7 also takes d == 1.
int quantize_depth(double d);

DepthTarget make_depth_target(std::span<const std::uint8_t> bytes, int height, int width);

// Full-resolution normalised depth plane (each byte -> (b/255)^10), used as
// the fourth input channel in RGBD mode.
std::vector<float> normalized_depth_plane(std::span<const std::uint8_t> bytes);

}  // namespace nav::targets
