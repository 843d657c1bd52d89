// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "nav/world/maze_layout.hpp"

namespace nav::targets {

// Row-major floor-cell id of a continuous position. Throws DataError for
// positions outside the maze or inside a solid cell.
int position_cell(const std::array<double, 2>& p, const world::MazeLayout& layout);

// Centre of the floor cell with the given id.
std::array<double, 2> cell_center(int floor_id, const world::MazeLayout& layout);

}  // namespace nav::targets
