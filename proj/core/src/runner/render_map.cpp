// SPDX-License-Identifier: Apache-2.0
#include "nav/runner/render_map.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>

#include "nav/errors.hpp"

namespace nav::runner {

using world::MazeLayout;

std::vector<Polyline> trajectory_segments(const analysis::EpisodeLog& log) {
  std::vector<Polyline> segs;
  bool start_new = true;
  for (const auto& s : log.steps) {
    if (start_new) segs.emplace_back();
    segs.back().push_back(s.position);
    start_new = s.respawned;
  }
  return segs;
}

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

constexpr Rgb kFloor{236, 236, 230};
constexpr Rgb kSolid{70, 70, 80};
constexpr Rgb kWall{30, 30, 36};
constexpr Rgb kGoal{90, 190, 90};
constexpr Rgb kApple{210, 50, 50};
constexpr Rgb kStrawberry{230, 110, 170};

// Segments cycle through gray levels so consecutive spawns stay apart.
Rgb segment_gray(std::size_t i) {
  static constexpr std::uint8_t levels[] = {60, 110, 150, 90, 130};
  const std::uint8_t v = levels[i % 5];
  return {v, v, v};
}

std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::vector<int> goal_cells(const MazeLayout& m, const analysis::EpisodeLog* log) {
  if (log && log->goal_cell >= 0) {
    const auto floor = m.floor_cells();
    if (log->goal_cell < static_cast<int>(floor.size())) return {floor[log->goal_cell]};
  }
  return m.goal_cells;
}

struct Canvas {
  int w, h;
  std::vector<std::uint8_t> px;
  Canvas(int w_, int h_, Rgb bg) : w(w_), h(h_), px(static_cast<std::size_t>(w_) * h_ * 3) {
    for (int i = 0; i < w * h; ++i) {
      px[3 * i] = bg.r;
      px[3 * i + 1] = bg.g;
      px[3 * i + 2] = bg.b;
    }
  }
  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
    px[i] = c.r;
    px[i + 1] = c.g;
    px[i + 2] = c.b;
  }
  void rect(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) set(x, y, c);
  }
  void disc(double cx, double cy, double r, Rgb c) {
    for (int y = static_cast<int>(cy - r); y <= static_cast<int>(cy + r) + 1; ++y)
      for (int x = static_cast<int>(cx - r); x <= static_cast<int>(cx + r) + 1; ++x)
        if ((x + 0.5 - cx) * (x + 0.5 - cx) + (y + 0.5 - cy) * (y + 0.5 - cy) <= r * r) set(x, y, c);
  }
  void line(double x0, double y0, double x1, double y1, double width, Rgb c) {
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int n = std::max(1, static_cast<int>(std::ceil(len * 2)));
    for (int i = 0; i <= n; ++i) {
      const double t = static_cast<double>(i) / n;
      disc(x0 + t * (x1 - x0), y0 + t * (y1 - y0), width / 2, c);
    }
  }
};

}  // namespace

std::string render_map_svg(const MazeLayout& m, const analysis::EpisodeLog* log,
                           const MapStyle& st) {
  const int s = st.cell_px, pad = st.margin_px;
  const int w = m.cols * s + 2 * pad, h = m.rows * s + 2 * pad;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"" << hex(kSolid)
    << "\"/>\n";
  auto cx = [&](double x) { return pad + x * s; };
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      if (m.is_floor(r, c))
        o << "<rect class=\"floor\" x=\"" << cx(c) << "\" y=\"" << cx(r) << "\" width=\"" << s
          << "\" height=\"" << s << "\" fill=\"" << hex(kFloor) << "\"/>\n";
  for (int g : goal_cells(m, log))
    o << "<rect class=\"goal\" x=\"" << cx(m.col_of(g)) << "\" y=\"" << cx(m.row_of(g))
      << "\" width=\"" << s << "\" height=\"" << s << "\" fill=\"" << hex(kGoal)
      << "\" fill-opacity=\"0.6\"/>\n";
  for (const auto& f : m.fruits)
    o << "<circle class=\"fruit\" cx=\"" << cx(m.col_of(f.cell) + 0.5) << "\" cy=\""
      << cx(m.row_of(f.cell) + 0.5) << "\" r=\"" << s * 0.15 << "\" fill=\""
      << hex(f.kind == world::FruitKind::kApple ? kApple : kStrawberry) << "\"/>\n";
  // Thin walls between floor cells, drawn once per edge (east and south).
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      if (!m.is_floor(r, c)) continue;
      auto wall = [&](double x0, double y0, double x1, double y1) {
        o << "<line class=\"wall\" x1=\"" << cx(x0) << "\" y1=\"" << cx(y0) << "\" x2=\""
          << cx(x1) << "\" y2=\"" << cx(y1) << "\" stroke=\"" << hex(kWall)
          << "\" stroke-width=\"3\" stroke-linecap=\"square\"/>\n";
      };
      if (m.blocked(r, c, world::kNorth)) wall(c, r, c + 1, r);
      if (m.blocked(r, c, world::kWest)) wall(c, r, c, r + 1);
      if (m.blocked(r, c, world::kEast)) wall(c + 1, r, c + 1, r + 1);
      if (m.blocked(r, c, world::kSouth)) wall(c, r + 1, c + 1, r + 1);
    }
  if (log) {
    const auto segs = trajectory_segments(*log);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      o << "<polyline class=\"trajectory\" data-segment=\"" << i << "\" fill=\"none\" stroke=\""
        << hex(segment_gray(i)) << "\" stroke-width=\"2\" points=\"";
      for (std::size_t k = 0; k < segs[i].size(); ++k)
        o << (k ? " " : "") << cx(segs[i][k][0]) << ',' << cx(segs[i][k][1]);
      o << "\"/>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

void write_png(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw DataError("png: pixel buffer does not match the image size");
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) throw DataError(path + ": cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError(path + ": png write failed");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_map_png(const std::string& path, const MazeLayout& m, const analysis::EpisodeLog* log,
                   const MapStyle& st) {
  const int s = st.cell_px, pad = st.margin_px;
  Canvas cv(m.cols * s + 2 * pad, m.rows * s + 2 * pad, kSolid);
  auto px = [&](double v) { return pad + v * s; };
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      if (m.is_floor(r, c)) cv.rect(pad + c * s, pad + r * s, pad + (c + 1) * s, pad + (r + 1) * s, kFloor);
  for (int g : goal_cells(m, log)) {
    const int r = m.row_of(g), c = m.col_of(g);
    cv.rect(pad + c * s + 2, pad + r * s + 2, pad + (c + 1) * s - 2, pad + (r + 1) * s - 2, kGoal);
  }
  for (const auto& f : m.fruits)
    cv.disc(px(m.col_of(f.cell) + 0.5), px(m.row_of(f.cell) + 0.5), s * 0.15,
            f.kind == world::FruitKind::kApple ? kApple : kStrawberry);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      if (!m.is_floor(r, c)) continue;
      if (m.blocked(r, c, world::kNorth)) cv.line(px(c), px(r), px(c + 1), px(r), 3, kWall);
      if (m.blocked(r, c, world::kWest)) cv.line(px(c), px(r), px(c), px(r + 1), 3, kWall);
      if (m.blocked(r, c, world::kEast)) cv.line(px(c + 1), px(r), px(c + 1), px(r + 1), 3, kWall);
      if (m.blocked(r, c, world::kSouth)) cv.line(px(c), px(r + 1), px(c + 1), px(r + 1), 3, kWall);
    }
  if (log) {
    const auto segs = trajectory_segments(*log);
    for (std::size_t i = 0; i < segs.size(); ++i)
      for (std::size_t k = 1; k < segs[i].size(); ++k)
        cv.line(px(segs[i][k - 1][0]), px(segs[i][k - 1][1]), px(segs[i][k][0]),
                px(segs[i][k][1]), 2, segment_gray(i));
  }
  write_png(path, cv.w, cv.h, cv.px);
}

}  // namespace nav::runner
