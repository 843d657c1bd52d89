// SPDX-License-Identifier: Apache-2.0
#include "nav/targets/position.hpp"

#include <cmath>
#include <string>

#include "nav/errors.hpp"

namespace nav::targets {

int position_cell(const std::array<double, 2>& p, const world::MazeLayout& layout) {
  const int col = static_cast<int>(std::floor(p[0]));
  const int row = static_cast<int>(std::floor(p[1]));
  if (!layout.is_floor(row, col))
    throw DataError("position (" + std::to_string(p[0]) + ", " + std::to_string(p[1]) +
                    ") is not on a floor cell");
  return layout.floor_id(layout.cell_index(row, col));
}

std::array<double, 2> cell_center(int floor_id, const world::MazeLayout& layout) {
  const auto floor = layout.floor_cells();
  if (floor_id < 0 || floor_id >= static_cast<int>(floor.size()))
    throw DataError("floor id " + std::to_string(floor_id) + " out of range");
  const int cell = floor[floor_id];
  return {layout.col_of(cell) + 0.5, layout.row_of(cell) + 0.5};
}

}  // namespace nav::targets
