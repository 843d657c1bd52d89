// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "nav/analysis/episode_log.hpp"
#include "nav/world/maze_layout.hpp"

namespace nav::runner {

using Polyline = std::vector<std::array<double, 2>>;

// Splits an episode's positions into one polyline per spawn: a new segment
// starts after every step that respawned the agent.
std::vector<Polyline> trajectory_segments(const analysis::EpisodeLog& log);

struct MapStyle {
  int cell_px = 48;
  int margin_px = 8;
};

// Top-down map: floor, solid cells, thin walls, goal cell (the episode's
// goal when `log` is given, else the layout's goal candidates), fruit, and
// one gray polyline per trajectory segment.
std::string render_map_svg(const world::MazeLayout& layout, const analysis::EpisodeLog* log,
                           const MapStyle& style = {});
// Same picture rasterised to an RGB PNG. Throws DataError on I/O failure.
void write_map_png(const std::string& path, const world::MazeLayout& layout,
                   const analysis::EpisodeLog* log, const MapStyle& style = {});

// Writes an RGB image (interleaved, row-major) as PNG.
void write_png(const std::string& path, int width, int height, const std::vector<std::uint8_t>& rgb);

}  // namespace nav::runner
