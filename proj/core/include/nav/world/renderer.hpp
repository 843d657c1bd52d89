// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "nav/world/maze_layout.hpp"

namespace nav::world {

struct WorldState;

struct RenderConfig {
  int width = 84;
  int height = 84;
  double fov = 1.5707963267948966;  // horizontal, radians
  double max_range = 20.0;          // far plane
  double near_plane = 0.1;          // only used for Z-buffer byte encoding
  double eye_height = 0.5;          // walls span [0, 1]

  bool operator==(const RenderConfig&) const = default;
};

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // planar, 3 x height x width
  std::vector<float> depth;       // height x width perpendicular distances

  std::uint8_t& at(int channel, int row, int col) {
    return rgb[(static_cast<std::size_t>(channel) * height + row) * width + col];
  }
  std::uint8_t at(int channel, int row, int col) const {
    return rgb[(static_cast<std::size_t>(channel) * height + row) * width + col];
  }
};

// Column raycaster over the cell grid (grid DDA per pixel column). Depth is
// the perpendicular, fisheye-corrected distance to whatever the pixel sees:
// a wall face, or the floor/ceiling planes, clamped to the far plane.
class Renderer {
 public:
  explicit Renderer(RenderConfig config = {});

  Frame render(const WorldState& state, const MazeLayout& layout) const;
  void render_into(const WorldState& state, const MazeLayout& layout, Frame& frame) const;

  const RenderConfig& config() const { return config_; }

  struct Hit {
    double distance = 0;  // perpendicular
    int cell = -1;        // cell the ray was in
    int side = 0;         // face of that cell that was hit
    double u = 0;         // [0,1) position along the face
  };
  // Casts a single ray. direction need not be unit length; distance is the
  // ray parameter t, which is perpendicular depth when direction = view +
  // k * camera_plane.
  static Hit cast(const MazeLayout& layout, double x, double y, double dx, double dy,
                  double max_t);

 private:
  RenderConfig config_;
  double focal_ = 0;  // pixels
  std::vector<double> column_offset_;
};

// RGB colour of a wall texel, u,v in [0,1).
void texel(FaceTexture tex, double u, double v, std::uint8_t rgb[3]);

}  // namespace nav::world
