// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "nav/world/maze_layout.hpp"
#include "nav/world/renderer.hpp"

namespace nav::world {

inline constexpr int kNumActions = 8;
inline constexpr int kActionRepeat = 4;
inline constexpr int kVelocityDims = 6;
// Simulated seconds per env step (60 env steps = 1 s).
inline constexpr double kEnvStepsPerSecond = 60.0;

// 0 rotate-left, 1 rotate-right, 2 strafe-left, 3 strafe-right, 4 forward,
// 5 backward, 6 forward+rotate-left, 7 forward+rotate-right.
struct Action {
  int id = 0;
};

struct PhysicsConfig {
  double accel = 0.01;         // per env step
  double rotate_step = 0.15;   // rad per env step for pure rotations
  double angular_accel = 0.05; // rad per env step^2 while moving and turning
  double damping = 0.9;        // velocity multiplier per env step
  double max_speed = 0.053;    // units per env step (~3.2 cells/s)
  double radius = 0.2;         // collision radius of the agent

  bool operator==(const PhysicsConfig&) const = default;
};

// Heading 0 faces +x (increasing column); +pi/2 faces +y (increasing row).
// The agent's right-hand direction is (-sin h, cos h).
struct Pose {
  double x = 0;
  double y = 0;
  double heading = 0;
  std::array<double, 2> v_lin{0, 0};  // world frame, units per env step
  double v_ang = 0;                   // rad per env step
};

struct EpisodeFruit {
  FruitPlacement placement;
  bool present = true;
};

struct WorldState {
  Pose pose;
  std::vector<EpisodeFruit> fruit;
  int goal_cell = -1;
  int env_step = 0;
  int budget = 0;
  std::mt19937_64 rng;
  int last_action = -1;  // -1 before the first step of an episode
  double last_reward = 0;
  bool done = false;

  // Episode tallies.
  int goals = 0;
  int apples = 0;
  int strawberries = 0;
  double total_reward = 0;
};

struct Observation {
  Frame frame;                                   // rgb + raw depth
  std::array<float, kVelocityDims> velocity{};   // agent-relative
  std::array<float, kNumActions> prev_action{};  // one-hot, all zero at episode start
  float prev_reward = 0;
};

struct StepResult {
  double reward = 0;
  bool done = false;
  bool respawned = false;  // a goal teleported the agent during this step
  int goal_events = 0;
  // Per env step pose before/after, for self-consistency checks.
  std::vector<Pose> env_poses;
};

struct EnvConfig {
  PhysicsConfig physics;
  RenderConfig render;
  bool record_env_poses = false;

  bool operator==(const EnvConfig&) const = default;
};

class MazeEnv;

// Samples a start pose, and in random-goal kinds the goal and fruit.
WorldState reset_state(const MazeLayout& layout, std::uint64_t episode_seed,
                       const PhysicsConfig& physics = {});
// Advances kActionRepeat env steps (fewer if the budget runs out).
StepResult step_state(WorldState& state, const MazeLayout& layout, Action action,
                      const PhysicsConfig& physics, bool record_poses = false);

// (forward, lateral, vertical=0, yaw rate, pitch=0, roll=0), agent frame.
std::array<double, kVelocityDims> agent_relative_velocity(const Pose& pose);

struct GroundTruth {
  std::array<double, 2> p{0, 0};
  int cell = -1;  // row-major floor id
};
GroundTruth ground_truth_position(const WorldState& state, const MazeLayout& layout);

// Convenience wrapper owning a layout, state and renderer.
class MazeEnv {
 public:
  MazeEnv(MazeLayout layout, EnvConfig config = {});

  const Observation& reset(std::uint64_t episode_seed);
  const Observation& step(Action action);

  const MazeLayout& layout() const { return layout_; }
  const WorldState& state() const { return state_; }
  const Observation& observation() const { return obs_; }
  const StepResult& last_step() const { return last_; }
  const EnvConfig& config() const { return config_; }
  bool done() const { return state_.done; }

 private:
  void observe();

  MazeLayout layout_;
  EnvConfig config_;
  Renderer renderer_;
  WorldState state_;
  Observation obs_;
  StepResult last_;
  bool started_ = false;
};

}  // namespace nav::world
