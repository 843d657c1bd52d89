// SPDX-License-Identifier: Apache-2.0
#include "nav/world/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nav/errors.hpp"

namespace nav::world {

namespace {

constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};

struct Segment {
  double x0, y0, x1, y1;
};

// Wall segments bounding the cells within one cell of (x, y).
void nearby_walls(const MazeLayout& m, double x, double y, std::vector<Segment>& out) {
  out.clear();
  const int c0 = static_cast<int>(std::floor(x)), r0 = static_cast<int>(std::floor(y));
  for (int r = r0 - 1; r <= r0 + 1; ++r)
    for (int c = c0 - 1; c <= c0 + 1; ++c) {
      if (!m.is_floor(r, c)) continue;
      if (m.blocked(r, c, kNorth)) out.push_back({double(c), double(r), double(c + 1), double(r)});
      if (m.blocked(r, c, kSouth))
        out.push_back({double(c), double(r + 1), double(c + 1), double(r + 1)});
      if (m.blocked(r, c, kWest)) out.push_back({double(c), double(r), double(c), double(r + 1)});
      if (m.blocked(r, c, kEast))
        out.push_back({double(c + 1), double(r), double(c + 1), double(r + 1)});
    }
}

// Moves a disc by (dx, dy) and pushes it back out of any wall it overlaps.
// Pushing along the contact normal removes only the normal component of the
// motion, so the agent slides along walls.
void move_disc(const MazeLayout& m, double radius, double& x, double& y, double dx, double dy) {
  std::vector<Segment> walls;
  const int substeps = 2;
  for (int s = 0; s < substeps; ++s) {
    double nx = x + dx / substeps, ny = y + dy / substeps;
    nearby_walls(m, nx, ny, walls);
    for (int iter = 0; iter < 4; ++iter) {
      bool moved = false;
      for (const Segment& w : walls) {
        const double sx = w.x1 - w.x0, sy = w.y1 - w.y0;
        const double len2 = sx * sx + sy * sy;
        double t = ((nx - w.x0) * sx + (ny - w.y0) * sy) / len2;
        t = std::clamp(t, 0.0, 1.0);
        const double qx = w.x0 + t * sx, qy = w.y0 + t * sy;
        const double ex = nx - qx, ey = ny - qy;
        const double d = std::sqrt(ex * ex + ey * ey);
        if (d < radius && d > 0) {
          nx = qx + ex / d * radius;
          ny = qy + ey / d * radius;
          moved = true;
        }
      }
      if (!moved) break;
    }
    x = nx;
    y = ny;
  }
}

int cell_at(const MazeLayout& m, double x, double y) {
  const int c = static_cast<int>(std::floor(x)), r = static_cast<int>(std::floor(y));
  if (!m.in_bounds(r, c)) return -1;
  return m.cell_index(r, c);
}

double wrap_angle(double a) {
  constexpr double two_pi = 2 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a < 0) a += two_pi;
  return a;
}

void place_at_spawn(WorldState& s, const MazeLayout& m) {
  // Avoid the goal cell and its open neighbours when anything else is left.
  std::vector<int> options;
  const int gr = s.goal_cell >= 0 ? m.row_of(s.goal_cell) : -100;
  const int gc = s.goal_cell >= 0 ? m.col_of(s.goal_cell) : -100;
  for (int cell : m.spawn_cells) {
    const int manhattan = std::abs(m.row_of(cell) - gr) + std::abs(m.col_of(cell) - gc);
    if (manhattan > 1) options.push_back(cell);
  }
  if (options.empty())
    for (int cell : m.spawn_cells)
      if (cell != s.goal_cell) options.push_back(cell);
  if (options.empty()) throw ConfigError("layout has no usable spawn cell");
  const int cell = options[s.rng() % options.size()];
  std::uniform_real_distribution<double> heading(0.0, 2 * std::numbers::pi);
  s.pose = Pose{};
  s.pose.x = m.col_of(cell) + 0.5;
  s.pose.y = m.row_of(cell) + 0.5;
  s.pose.heading = heading(s.rng);
}

}  // namespace

WorldState reset_state(const MazeLayout& layout, std::uint64_t episode_seed,
                       const PhysicsConfig& /*physics*/) {
  if (layout.goal_cells.empty() || layout.spawn_cells.empty())
    throw ConfigError("layout needs goal and spawn cells");
  WorldState s;
  s.rng.seed(episode_seed);
  s.budget = layout.episode_budget;
  if (is_random_goal(layout.kind)) {
    s.goal_cell = layout.goal_cells[s.rng() % layout.goal_cells.size()];
  } else {
    s.goal_cell = layout.goal_cells.front();
  }
  for (const auto& f : layout.fruits) s.fruit.push_back({f, true});
  if (layout.kind == MazeKind::kRandomSmall || layout.kind == MazeKind::kRandomLarge) {
    // Fresh apples on ~15% of the floor, away from the goal.
    std::bernoulli_distribution apple(0.15);
    for (int cell : layout.floor_cells())
      if (cell != s.goal_cell && apple(s.rng)) s.fruit.push_back({{cell, FruitKind::kApple}, true});
  }
  place_at_spawn(s, layout);
  return s;
}

StepResult step_state(WorldState& s, const MazeLayout& m, Action action,
                      const PhysicsConfig& ph, bool record_poses) {
  if (s.done) throw UsageError("step called after the episode finished");
  if (action.id < 0 || action.id >= kNumActions)
    throw UsageError("action id " + std::to_string(action.id) + " out of range");
  StepResult res;
  if (record_poses) res.env_poses.push_back(s.pose);

  double fwd = 0, lat = 0;
  switch (action.id) {
    case 2: lat = -ph.accel; break;
    case 3: lat = ph.accel; break;
    case 4: case 6: case 7: fwd = ph.accel; break;
    case 5: fwd = -ph.accel; break;
    default: break;
  }

  for (int k = 0; k < kActionRepeat && s.env_step < s.budget; ++k) {
    Pose& p = s.pose;
    switch (action.id) {
      case 0: p.v_ang = -ph.rotate_step; break;
      case 1: p.v_ang = ph.rotate_step; break;
      case 6:
        p.v_ang = std::clamp(ph.damping * p.v_ang - ph.angular_accel, -ph.rotate_step, ph.rotate_step);
        break;
      case 7:
        p.v_ang = std::clamp(ph.damping * p.v_ang + ph.angular_accel, -ph.rotate_step, ph.rotate_step);
        break;
      default: p.v_ang *= ph.damping; break;
    }
    p.heading = wrap_angle(p.heading + p.v_ang);
    const double cx = std::cos(p.heading), cy = std::sin(p.heading);
    double vx = ph.damping * p.v_lin[0] + fwd * cx - lat * cy;
    double vy = ph.damping * p.v_lin[1] + fwd * cy + lat * cx;
    const double speed = std::hypot(vx, vy);
    if (speed > ph.max_speed) {
      vx *= ph.max_speed / speed;
      vy *= ph.max_speed / speed;
    }
    const double x0 = p.x, y0 = p.y;
    move_disc(m, ph.radius, p.x, p.y, vx, vy);
    // Realised displacement, so positions integrate exactly from velocities.
    p.v_lin = {p.x - x0, p.y - y0};
    ++s.env_step;

    double r = 0;
    const int cell = cell_at(m, p.x, p.y);
    for (auto& f : s.fruit) {
      if (f.present && f.placement.cell == cell) {
        f.present = false;
        if (f.placement.kind == FruitKind::kApple) {
          r += 1;
          ++s.apples;
        } else {
          r += 2;
          ++s.strawberries;
        }
      }
    }
    if (cell == s.goal_cell) {
      r += 10;
      ++s.goals;
      ++res.goal_events;
      res.respawned = true;
      place_at_spawn(s, m);
    }
    res.reward += r;
    if (record_poses) res.env_poses.push_back(s.pose);
  }
  s.total_reward += res.reward;
  s.last_action = action.id;
  s.last_reward = res.reward;
  s.done = s.env_step >= s.budget;
  res.done = s.done;
  return res;
}

std::array<double, kVelocityDims> agent_relative_velocity(const Pose& p) {
  const double cx = std::cos(p.heading), cy = std::sin(p.heading);
  const double forward = p.v_lin[0] * cx + p.v_lin[1] * cy;
  const double lateral = -p.v_lin[0] * cy + p.v_lin[1] * cx;
  return {forward, lateral, 0.0, p.v_ang, 0.0, 0.0};
}

GroundTruth ground_truth_position(const WorldState& state, const MazeLayout& layout) {
  GroundTruth g;
  g.p = {state.pose.x, state.pose.y};
  g.cell = layout.floor_id(cell_at(layout, state.pose.x, state.pose.y));
  return g;
}

// ---------------------------------------------------------------- MazeEnv

MazeEnv::MazeEnv(MazeLayout layout, EnvConfig config)
    : layout_(std::move(layout)), config_(config), renderer_(config.render) {}

void MazeEnv::observe() {
  renderer_.render_into(state_, layout_, obs_.frame);
  const auto v = agent_relative_velocity(state_.pose);
  for (int i = 0; i < kVelocityDims; ++i) obs_.velocity[i] = static_cast<float>(v[i]);
  obs_.prev_action.fill(0.0f);
  if (state_.last_action >= 0) obs_.prev_action[state_.last_action] = 1.0f;
  obs_.prev_reward = static_cast<float>(state_.last_reward);
}

const Observation& MazeEnv::reset(std::uint64_t episode_seed) {
  state_ = reset_state(layout_, episode_seed, config_.physics);
  last_ = StepResult{};
  started_ = true;
  observe();
  return obs_;
}

const Observation& MazeEnv::step(Action action) {
  if (!started_) throw UsageError("step before reset");
  last_ = step_state(state_, layout_, action, config_.physics, config_.record_env_poses);
  observe();
  return obs_;
}

}  // namespace nav::world
