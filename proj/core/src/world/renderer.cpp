// SPDX-License-Identifier: Apache-2.0
#include "nav/world/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nav/errors.hpp"
#include "nav/world/world.hpp"

namespace nav::world {

namespace {

constexpr std::uint8_t kBasePalette[8][3] = {
    {170, 60, 50},  {60, 120, 180}, {200, 170, 70},  {80, 150, 90},
    {150, 90, 160}, {90, 170, 170}, {190, 120, 60},  {120, 120, 130},
};
constexpr std::uint8_t kDecalPalette[7][3] = {
    {0, 0, 0},      {250, 250, 250}, {20, 20, 20},    {250, 220, 0},
    {0, 230, 120},  {240, 40, 200},  {30, 60, 250},
};

double frac(double v) { return v - std::floor(v); }

bool in_decal(int decal, double u, double v) {
  const double cu = u - 0.5, cv = v - 0.5;
  const double r = std::sqrt(cu * cu + cv * cv);
  switch (decal) {
    case 1: return r < 0.18;
    case 2: return std::abs(cu) < 0.15 && std::abs(cv) < 0.15;
    case 3: return (std::abs(cu) < 0.05 && std::abs(cv) < 0.2) ||
                   (std::abs(cv) < 0.05 && std::abs(cu) < 0.2);
    case 4: return cv > -0.18 && cv < 0.18 && std::abs(cu) < (0.18 - cv) * 0.6;
    case 5: return std::abs(cu) + std::abs(cv) < 0.2;
    case 6: return r > 0.12 && r < 0.2;
    default: return false;
  }
}

void put(Frame& f, int row, int col, const std::uint8_t c[3], double shade) {
  for (int ch = 0; ch < 3; ++ch)
    f.at(ch, row, col) = static_cast<std::uint8_t>(std::clamp(c[ch] * shade, 0.0, 255.0));
}

}  // namespace

void texel(FaceTexture tex, double u, double v, std::uint8_t rgb[3]) {
  const std::uint8_t* base = kBasePalette[tex.base % 8];
  double k = 1.0;
  switch (tex.base % 4) {
    case 0: k = frac(u * 4) < 0.5 ? 1.0 : 0.75; break;
    case 1: k = frac(v * 4) < 0.5 ? 1.0 : 0.7; break;
    case 2: k = (static_cast<int>(u * 4) + static_cast<int>(v * 4)) % 2 ? 0.7 : 1.0; break;
    case 3: {
      const int course = static_cast<int>(v * 5);
      const double off = course % 2 ? 0.25 : 0.0;
      const bool mortar = frac(v * 5) < 0.12 || frac(u * 2 + off) < 0.06;
      k = mortar ? 0.55 : 1.0;
      break;
    }
  }
  for (int ch = 0; ch < 3; ++ch) rgb[ch] = static_cast<std::uint8_t>(base[ch] * k);
  if (tex.decal && in_decal(tex.decal, u, v)) {
    const std::uint8_t* d = kDecalPalette[tex.decal % 7];
    for (int ch = 0; ch < 3; ++ch) rgb[ch] = d[ch];
  }
}

Renderer::Renderer(RenderConfig config) : config_(config) {
  if (config_.width <= 0 || config_.height <= 0) throw ConfigError("render size must be positive");
  if (!(config_.fov > 0 && config_.fov < 3.1)) throw ConfigError("render fov out of range");
  const double half = std::tan(config_.fov / 2);
  focal_ = (config_.width / 2.0) / half;
  column_offset_.resize(static_cast<std::size_t>(config_.width));
  for (int c = 0; c < config_.width; ++c)
    column_offset_[c] = (2.0 * (c + 0.5) / config_.width - 1.0) * half;
}

Renderer::Hit Renderer::cast(const MazeLayout& layout, double x, double y, double dx, double dy,
                             double max_t) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int col = static_cast<int>(std::floor(x));
  int row = static_cast<int>(std::floor(y));
  const int step_c = dx < 0 ? -1 : 1;
  const int step_r = dy < 0 ? -1 : 1;
  const double delta_c = dx != 0 ? 1.0 / std::abs(dx) : kInf;
  const double delta_r = dy != 0 ? 1.0 / std::abs(dy) : kInf;
  double next_c = dx != 0 ? (step_c > 0 ? col + 1 - x : x - col) * delta_c : kInf;
  double next_r = dy != 0 ? (step_r > 0 ? row + 1 - y : y - row) * delta_r : kInf;

  Hit hit;
  while (true) {
    double t;
    int side;
    const bool across_col = next_c < next_r;
    if (across_col) {
      t = next_c;
      side = step_c > 0 ? kEast : kWest;
    } else {
      t = next_r;
      side = step_r > 0 ? kSouth : kNorth;
    }
    if (t > max_t) {
      hit.distance = max_t;
      hit.cell = -1;
      return hit;
    }
    if (layout.blocked(row, col, side)) {
      hit.distance = t;
      hit.cell = layout.cell_index(row, col);
      hit.side = side;
      const double along = across_col ? y + t * dy : x + t * dx;
      hit.u = frac(along);
      if (side == kSouth || side == kWest) hit.u = 1.0 - hit.u;
      return hit;
    }
    if (across_col) {
      col += step_c;
      next_c += delta_c;
    } else {
      row += step_r;
      next_r += delta_r;
    }
  }
}

Frame Renderer::render(const WorldState& state, const MazeLayout& layout) const {
  Frame f;
  render_into(state, layout, f);
  return f;
}

void Renderer::render_into(const WorldState& state, const MazeLayout& layout, Frame& f) const {
  const int w = config_.width, h = config_.height;
  f.width = w;
  f.height = h;
  f.rgb.resize(static_cast<std::size_t>(3 * w * h));
  f.depth.resize(static_cast<std::size_t>(w * h));

  const Pose& p = state.pose;
  const double fx = std::cos(p.heading), fy = std::sin(p.heading);
  const double rx = -fy, ry = fx;  // right-hand direction
  const double eye = config_.eye_height;
  const double range = config_.max_range;
  const double horizon = h / 2.0;

  // Floor markers: goal pad and fruit present this episode.
  std::vector<std::int8_t> marker(static_cast<std::size_t>(layout.rows * layout.cols), 0);
  if (state.goal_cell >= 0) marker[state.goal_cell] = 1;
  for (const auto& fr : state.fruit)
    if (fr.present) marker[fr.placement.cell] = fr.placement.kind == FruitKind::kApple ? 2 : 3;

  static constexpr std::uint8_t kFloorA[3] = {105, 95, 80};
  static constexpr std::uint8_t kFloorB[3] = {90, 82, 70};
  static constexpr std::uint8_t kGoal[3] = {40, 230, 60};
  static constexpr std::uint8_t kApple[3] = {230, 30, 30};
  static constexpr std::uint8_t kBerry[3] = {250, 60, 170};
  static constexpr std::uint8_t kSky[3] = {150, 180, 215};
  static constexpr std::uint8_t kFog[3] = {40, 40, 40};

  for (int c = 0; c < w; ++c) {
    const double dx = fx + rx * column_offset_[c];
    const double dy = fy + ry * column_offset_[c];
    const Hit hit = cast(layout, p.x, p.y, dx, dy, range);
    const double t = hit.distance;
    const double top = -focal_ * (1.0 - eye) / t;
    const double bottom = focal_ * eye / t;
    std::uint8_t wall_rgb[3];
    for (int r = 0; r < h; ++r) {
      const double off = r + 0.5 - horizon;
      float& depth = f.depth[static_cast<std::size_t>(r) * w + c];
      if (off >= top && off <= bottom) {
        depth = static_cast<float>(t);
        if (hit.cell < 0) {
          put(f, r, c, kFog, 1.0);
          continue;
        }
        const double z = eye - off * t / focal_;
        texel(layout.face_texture[hit.cell * 4 + hit.side], hit.u,
              std::clamp(1.0 - z, 0.0, 0.999999), wall_rgb);
        const double shade = (hit.side == kEast || hit.side == kWest ? 0.85 : 1.0) /
                             (1.0 + 0.06 * t);
        put(f, r, c, wall_rgb, shade);
      } else if (off > 0) {
        const double tf = eye * focal_ / off;
        depth = static_cast<float>(std::min(tf, range));
        const double wx = p.x + tf * dx, wy = p.y + tf * dy;
        const int col = static_cast<int>(std::floor(wx)), row = static_cast<int>(std::floor(wy));
        const std::uint8_t* colour = (row + col) % 2 ? kFloorA : kFloorB;
        if (layout.in_bounds(row, col)) {
          const int m = marker[layout.cell_index(row, col)];
          const double cu = frac(wx) - 0.5, cv = frac(wy) - 0.5;
          if (m == 1 && std::abs(cu) < 0.4 && std::abs(cv) < 0.4) colour = kGoal;
          else if (m == 2 && cu * cu + cv * cv < 0.06) colour = kApple;
          else if (m == 3 && cu * cu + cv * cv < 0.06) colour = kBerry;
        }
        put(f, r, c, colour, 1.0 / (1.0 + 0.06 * tf));
      } else {
        const double tc = (1.0 - eye) * focal_ / -off;
        depth = static_cast<float>(std::min(tc, range));
        put(f, r, c, kSky, 1.0);
      }
    }
  }
}

}  // namespace nav::world
