// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nav::world {

enum class MazeKind : std::uint8_t {
  kIMaze,
  kStaticSmall,
  kStaticLarge,
  kRandomSmall,
  kRandomLarge,
  kStaticMini,  // 5x5 layout used by the desk-scale learning checks
};

std::string_view to_string(MazeKind kind);
std::optional<MazeKind> parse_maze_kind(std::string_view name);

// Goal (and fruit) positions are resampled every episode.
bool is_random_goal(MazeKind kind);

enum class FruitKind : std::uint8_t { kApple, kStrawberry };

struct FruitPlacement {
  int cell = 0;  // grid index row * cols + col
  FruitKind kind = FruitKind::kApple;
};

// Sides of a cell. North is row - 1.
enum Side : int { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };

// Texture descriptor for one wall face: a base pattern and an optional cue
// decal (0 = none).
struct FaceTexture {
  std::uint8_t base = 0;
  std::uint8_t decal = 0;
  bool operator==(const FaceTexture&) const = default;
};

// Interior grid of rows x cols unit cells; everything outside is wall. Cells
// are solid or floor; adjacent floor cells may additionally be separated by a
// zero-thickness wall ("blocked edge").
struct MazeLayout {
  MazeKind kind = MazeKind::kStaticSmall;
  std::uint64_t seed = 0;
  int rows = 0;
  int cols = 0;
  int episode_budget = 3600;  // env steps

  std::vector<std::uint8_t> solid;         // rows*cols
  std::vector<std::uint8_t> edge_wall;     // rows*cols*4, thin walls; symmetric
  std::vector<FaceTexture> face_texture;   // rows*cols*4, used where blocked()
  std::vector<int> spawn_cells;            // grid indices
  std::vector<int> goal_cells;             // grid indices
  std::vector<FruitPlacement> fruits;      // layout-declared fruit

  int cell_index(int row, int col) const { return row * cols + col; }
  int row_of(int cell) const { return cell / cols; }
  int col_of(int cell) const { return cell % cols; }
  bool in_bounds(int row, int col) const { return row >= 0 && row < rows && col >= 0 && col < cols; }
  bool is_floor(int row, int col) const { return in_bounds(row, col) && !solid[cell_index(row, col)]; }

  // True when movement from (row, col) across `side` is impossible.
  bool blocked(int row, int col, int side) const;

  // Floor cells in row-major order; position ids are indices into this.
  std::vector<int> floor_cells() const;
  int num_floor_cells() const;
  // Floor id of a grid cell or -1.
  int floor_id(int cell) const;

  // Every floor cell reaches every other (4-connectivity through open edges).
  bool is_connected() const;
  // BFS distance in cells (open edges only); -1 if unreachable.
  std::vector<int> distances_from(int cell) const;
};

// Procedural layouts. Pure; the same (kind, seed) always yields the same layout.
MazeLayout generate_layout(MazeKind kind, std::uint64_t seed);

// Plain-text lattice format. A header line
//   # navw-layout kind=<kind> seed=<seed> budget=<env steps>
// is followed by (2*rows+1) lines of (2*cols+1) characters. Cell (r, c) sits
// at text position (2r+1, 2c+1) and is one of '#' (solid), '.', 'S' (spawn),
// 'G' (goal candidate), 'A' (apple), 'B' (strawberry). Odd/even positions
// between two cells are '#' for a wall and '.' for an opening. In random-goal
// kinds every floor cell is a goal candidate and the grid marks spawns only.
void write_layout(std::ostream& out, const MazeLayout& layout);
MazeLayout read_layout(std::istream& in);
std::string layout_to_string(const MazeLayout& layout);
MazeLayout layout_from_string(const std::string& text);

}  // namespace nav::world
