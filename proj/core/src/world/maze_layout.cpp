// SPDX-License-Identifier: Apache-2.0
#include "nav/world/maze_layout.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>

#include "nav/errors.hpp"

namespace nav::world {

namespace {

constexpr std::array<std::pair<MazeKind, std::string_view>, 6> kKindNames = {{
    {MazeKind::kIMaze, "imaze"},
    {MazeKind::kStaticSmall, "static_small"},
    {MazeKind::kStaticLarge, "static_large"},
    {MazeKind::kRandomSmall, "random_small"},
    {MazeKind::kRandomLarge, "random_large"},
    {MazeKind::kStaticMini, "static_mini"},
}};

constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};

int opposite(int side) { return (side + 2) % 4; }

void set_edge(MazeLayout& m, int r, int c, int side, bool wall) {
  m.edge_wall[m.cell_index(r, c) * 4 + side] = wall;
  const int nr = r + kDr[side], nc = c + kDc[side];
  if (m.in_bounds(nr, nc)) m.edge_wall[m.cell_index(nr, nc) * 4 + opposite(side)] = wall;
}

MazeLayout blank(MazeKind kind, std::uint64_t seed, int rows, int cols, int budget) {
  MazeLayout m;
  m.kind = kind;
  m.seed = seed;
  m.rows = rows;
  m.cols = cols;
  m.episode_budget = budget;
  m.solid.assign(static_cast<std::size_t>(rows * cols), 0);
  m.edge_wall.assign(static_cast<std::size_t>(rows * cols * 4), 0);
  m.face_texture.assign(static_cast<std::size_t>(rows * cols * 4), FaceTexture{});
  return m;
}

// Randomised depth-first spanning tree, then knocks out a fraction of the
// remaining interior walls so the maze has loops.
void carve_maze(MazeLayout& m, std::mt19937_64& rng, double braid) {
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      for (int s = 0; s < 4; ++s)
        if (m.in_bounds(r + kDr[s], c + kDc[s])) set_edge(m, r, c, s, true);

  std::vector<std::uint8_t> seen(static_cast<std::size_t>(m.rows * m.cols), 0);
  std::vector<int> stack;
  const int start = static_cast<int>(rng() % static_cast<std::uint64_t>(m.rows * m.cols));
  stack.push_back(start);
  seen[start] = 1;
  while (!stack.empty()) {
    const int cur = stack.back();
    const int r = m.row_of(cur), c = m.col_of(cur);
    int options[4];
    int n = 0;
    for (int s = 0; s < 4; ++s) {
      const int nr = r + kDr[s], nc = c + kDc[s];
      if (m.in_bounds(nr, nc) && !seen[m.cell_index(nr, nc)]) options[n++] = s;
    }
    if (n == 0) {
      stack.pop_back();
      continue;
    }
    const int s = options[rng() % static_cast<std::uint64_t>(n)];
    set_edge(m, r, c, s, false);
    const int next = m.cell_index(r + kDr[s], c + kDc[s]);
    seen[next] = 1;
    stack.push_back(next);
  }

  std::bernoulli_distribution knock(braid);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      for (int s : {kEast, kSouth})
        if (m.in_bounds(r + kDr[s], c + kDc[s]) && m.edge_wall[m.cell_index(r, c) * 4 + s] &&
            knock(rng))
          set_edge(m, r, c, s, false);
}

// Wall faces share a base pattern per 3x3 block of cells so different parts of
// a maze look different; a minority of faces carries a cue decal.
// Depends only on (kind, seed, dims) so imported layouts repaint identically.
void paint_textures(MazeLayout& m) {
  std::mt19937_64 rng(m.seed * 0xD1B54A32D192ED03ULL + static_cast<std::uint64_t>(m.kind) * 7919 +
                      static_cast<std::uint64_t>(m.rows * 131 + m.cols));
  const int br = (m.rows + 2) / 3, bc = (m.cols + 2) / 3;
  std::vector<std::uint8_t> block_base(static_cast<std::size_t>(br * bc));
  for (auto& b : block_base) b = static_cast<std::uint8_t>(rng() % 8);
  std::bernoulli_distribution has_decal(0.12);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      for (int s = 0; s < 4; ++s) {
        FaceTexture t;
        t.base = block_base[(r / 3) * bc + c / 3];
        if (has_decal(rng)) t.decal = static_cast<std::uint8_t>(1 + rng() % 6);
        m.face_texture[m.cell_index(r, c) * 4 + s] = t;
      }
}

std::vector<int> sample_without_replacement(std::vector<int> pool, std::size_t n,
                                            std::mt19937_64& rng) {
  n = std::min(n, pool.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng() % (pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

MazeLayout grid_maze(MazeKind kind, std::uint64_t seed, int rows, int cols, int budget,
                     double braid) {
  MazeLayout m = blank(kind, seed, rows, cols, budget);
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(kind) + 1);
  carve_maze(m, rng, braid);
  paint_textures(m);
  const std::vector<int> floor = m.floor_cells();

  if (is_random_goal(kind)) {
    m.goal_cells = floor;
    m.spawn_cells = floor;
    return m;
  }

  const int goal = floor[rng() % floor.size()];
  m.goal_cells = {goal};
  for (int cell : floor)
    if (cell != goal) m.spawn_cells.push_back(cell);

  if (kind == MazeKind::kStaticMini) return m;

  // Fixed fruit: ~15% apples plus two strawberries, never on the goal.
  std::vector<int> candidates = m.spawn_cells;
  const std::size_t n_apples = static_cast<std::size_t>(std::lround(0.15 * floor.size()));
  auto chosen = sample_without_replacement(candidates, n_apples + 2, rng);
  for (std::size_t i = 0; i < chosen.size(); ++i)
    m.fruits.push_back({chosen[i], i < 2 ? FruitKind::kStrawberry : FruitKind::kApple});
  std::sort(m.fruits.begin(), m.fruits.end(),
            [](const FruitPlacement& a, const FruitPlacement& b) { return a.cell < b.cell; });
  // Fruit cells are not spawn points.
  std::erase_if(m.spawn_cells, [&](int cell) {
    return std::any_of(m.fruits.begin(), m.fruits.end(),
                       [cell](const FruitPlacement& f) { return f.cell == cell; });
  });
  return m;
}

// 11 x 13: two 2-row bars joined by a 3-wide trunk, with a goal alcove
// hanging off each end of both bars. 52 + 21 + 4 = 77 floor cells.
MazeLayout i_maze(std::uint64_t seed) {
  MazeLayout m = blank(MazeKind::kIMaze, seed, 11, 13, 3600);
  std::fill(m.solid.begin(), m.solid.end(), 1);
  auto open = [&](int r, int c) { m.solid[m.cell_index(r, c)] = 0; };
  for (int c = 0; c < 13; ++c) {
    open(0, c);
    open(1, c);
    open(9, c);
    open(10, c);
  }
  for (int r = 2; r <= 8; ++r)
    for (int c = 5; c <= 7; ++c) open(r, c);
  for (auto [r, c] : {std::pair{2, 0}, {2, 12}, {8, 0}, {8, 12}}) {
    open(r, c);
    m.goal_cells.push_back(m.cell_index(r, c));
  }
  std::sort(m.goal_cells.begin(), m.goal_cells.end());
  for (int r = 2; r <= 8; ++r)
    for (int c = 5; c <= 7; ++c) m.spawn_cells.push_back(m.cell_index(r, c));
  paint_textures(m);
  return m;
}

}  // namespace

std::string_view to_string(MazeKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<MazeKind> parse_maze_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

bool is_random_goal(MazeKind kind) {
  return kind == MazeKind::kRandomSmall || kind == MazeKind::kRandomLarge ||
         kind == MazeKind::kIMaze;
}

bool MazeLayout::blocked(int row, int col, int side) const {
  const int nr = row + kDr[side], nc = col + kDc[side];
  if (!is_floor(nr, nc)) return true;
  return edge_wall[cell_index(row, col) * 4 + side] != 0;
}

std::vector<int> MazeLayout::floor_cells() const {
  std::vector<int> out;
  for (int i = 0; i < rows * cols; ++i)
    if (!solid[i]) out.push_back(i);
  return out;
}

int MazeLayout::num_floor_cells() const {
  return static_cast<int>(std::count(solid.begin(), solid.end(), 0));
}

int MazeLayout::floor_id(int cell) const {
  if (cell < 0 || cell >= rows * cols || solid[cell]) return -1;
  return static_cast<int>(std::count(solid.begin(), solid.begin() + cell, 0));
}

std::vector<int> MazeLayout::distances_from(int cell) const {
  std::vector<int> dist(static_cast<std::size_t>(rows * cols), -1);
  if (cell < 0 || cell >= rows * cols || solid[cell]) return dist;
  std::queue<int> q;
  dist[cell] = 0;
  q.push(cell);
  while (!q.empty()) {
    const int cur = q.front();
    q.pop();
    const int r = row_of(cur), c = col_of(cur);
    for (int s = 0; s < 4; ++s) {
      if (blocked(r, c, s)) continue;
      const int nxt = cell_index(r + kDr[s], c + kDc[s]);
      if (dist[nxt] < 0) {
        dist[nxt] = dist[cur] + 1;
        q.push(nxt);
      }
    }
  }
  return dist;
}

bool MazeLayout::is_connected() const {
  const auto floor = floor_cells();
  if (floor.empty()) return false;
  const auto dist = distances_from(floor.front());
  return std::all_of(floor.begin(), floor.end(), [&](int c) { return dist[c] >= 0; });
}

MazeLayout generate_layout(MazeKind kind, std::uint64_t seed) {
  switch (kind) {
    case MazeKind::kIMaze:
      return i_maze(seed);
    case MazeKind::kStaticSmall:
    case MazeKind::kRandomSmall:
      return grid_maze(kind, seed, 5, 10, 3600, 0.3);
    case MazeKind::kStaticLarge:
    case MazeKind::kRandomLarge:
      return grid_maze(kind, seed, 9, 15, 10800, 0.3);
    case MazeKind::kStaticMini:
      return grid_maze(kind, seed, 5, 5, 900, 0.5);
  }
  throw ConfigError("unknown maze kind");
}

// ---------------------------------------------------------------- text io

void write_layout(std::ostream& out, const MazeLayout& m) {
  out << "# navw-layout kind=" << to_string(m.kind) << " seed=" << m.seed
      << " budget=" << m.episode_budget << "\n";
  const int tr = 2 * m.rows + 1, tc = 2 * m.cols + 1;
  std::vector<std::string> text(static_cast<std::size_t>(tr), std::string(tc, '#'));
  const bool random_goal = is_random_goal(m.kind) && m.kind != MazeKind::kIMaze;
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      const int cell = m.cell_index(r, c);
      if (m.solid[cell]) continue;
      char ch = '.';
      if (std::find(m.spawn_cells.begin(), m.spawn_cells.end(), cell) != m.spawn_cells.end())
        ch = 'S';
      for (const auto& f : m.fruits)
        if (f.cell == cell) ch = f.kind == FruitKind::kApple ? 'A' : 'B';
      if (!random_goal &&
          std::find(m.goal_cells.begin(), m.goal_cells.end(), cell) != m.goal_cells.end())
        ch = 'G';
      text[2 * r + 1][2 * c + 1] = ch;
      if (!m.blocked(r, c, kEast)) text[2 * r + 1][2 * c + 2] = '.';
      if (!m.blocked(r, c, kSouth)) text[2 * r + 2][2 * c + 1] = '.';
    }
  for (const auto& line : text) out << line << "\n";
}

MazeLayout read_layout(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw DataError("layout: empty input");
  std::istringstream hs(header);
  std::string hash, tag;
  hs >> hash >> tag;
  if (hash != "#" || tag != "navw-layout") throw DataError("layout: missing navw-layout header");
  std::optional<MazeKind> kind;
  std::uint64_t seed = 0;
  int budget = -1;
  std::string kv;
  while (hs >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw DataError("layout header: bad token '" + kv + "'");
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    try {
      if (key == "kind") kind = parse_maze_kind(val);
      else if (key == "seed") seed = std::stoull(val);
      else if (key == "budget") budget = std::stoi(val);
    } catch (const std::exception&) {
      throw DataError("layout header: bad value for " + key);
    }
  }
  if (!kind) throw DataError("layout header: missing or unknown kind");

  std::vector<std::string> text;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    text.push_back(line);
  }
  if (text.size() < 3 || text.size() % 2 == 0) throw DataError("layout: bad grid height");
  const std::size_t width = text[0].size();
  if (width < 3 || width % 2 == 0) throw DataError("layout: bad grid width");
  for (std::size_t i = 0; i < text.size(); ++i)
    if (text[i].size() != width)
      throw DataError("layout: line " + std::to_string(i + 2) + " has inconsistent width");

  const int rows = static_cast<int>(text.size() / 2);
  const int cols = static_cast<int>(width / 2);
  MazeLayout m = blank(*kind, seed, rows, cols, budget > 0 ? budget : 3600);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const char ch = text[2 * r + 1][2 * c + 1];
      const int cell = m.cell_index(r, c);
      switch (ch) {
        case '#': m.solid[cell] = 1; break;
        case '.': break;
        case 'S': m.spawn_cells.push_back(cell); break;
        case 'G': m.goal_cells.push_back(cell); break;
        case 'A': m.fruits.push_back({cell, FruitKind::kApple}); break;
        case 'B': m.fruits.push_back({cell, FruitKind::kStrawberry}); break;
        default:
          throw DataError("layout: unexpected character '" + std::string(1, ch) + "' on line " +
                          std::to_string(2 * r + 3));
      }
    }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) set_edge(m, r, c, kEast, text[2 * r + 1][2 * c + 2] == '#');
      if (r + 1 < rows) set_edge(m, r, c, kSouth, text[2 * r + 2][2 * c + 1] == '#');
    }
  if (is_random_goal(*kind) && *kind != MazeKind::kIMaze) m.goal_cells = m.floor_cells();
  if (m.goal_cells.empty()) throw DataError("layout: no goal candidates");
  if (m.spawn_cells.empty()) throw DataError("layout: no spawn cells");
  paint_textures(m);
  return m;
}

std::string layout_to_string(const MazeLayout& layout) {
  std::ostringstream os;
  write_layout(os, layout);
  return os.str();
}

MazeLayout layout_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_layout(is);
}

}  // namespace nav::world
