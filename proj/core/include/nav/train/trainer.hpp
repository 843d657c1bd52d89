// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nav/agent/architecture.hpp"
#include "nav/autodiff/param_vector.hpp"
#include "nav/targets/loop_closure.hpp"
#include "nav/train/hyperparams.hpp"
#include "nav/world/maze_layout.hpp"
#include "nav/world/world.hpp"

namespace nav::train {

// One learning-curve sample: the mean score of the episodes that finished
// inside a window of env steps.
struct CurvePoint {
  std::int64_t agent_steps = 0;  // at the end of the window
  double mean_score = 0;
  int episodes = 0;
  double wall_clock_s = 0;  // 0 in deterministic mode
  double mean_entropy = 0;  // mean policy entropy over the window's steps
};

struct TrainConfig {
  world::MazeLayout layout;
  world::EnvConfig env;
  agent::ArchitectureSpec arch;
  HyperParams hp;
  std::int64_t max_agent_steps = 25'000'000;
  std::int64_t window_env_steps = 50'000;
  std::uint64_t seed = 1;
  // Workers take turns chunk by chunk on the calling thread, so the run is a
  // pure function of the seeds.
  bool deterministic = false;
  std::int64_t checkpoint_every = 0;  // agent steps; 0 disables
  std::optional<double> stop_score;   // stop once a window mean reaches it
  targets::LoopThresholds loop;
  std::size_t replay_capacity = 2000;
  std::size_t replay_batch = 32;

  // Called under the curve lock.
  std::function<void(const CurvePoint&)> on_curve_point;
  std::function<void(std::int64_t agent_steps, const ad::ParamVector<float>&)> on_checkpoint;
  std::function<void(const std::string&)> on_incident;
};

struct TrainResult {
  ad::ParamVector<float> params;
  std::vector<CurvePoint> curve;
  std::int64_t env_steps = 0;
  std::int64_t agent_steps = 0;
  std::int64_t episodes = 0;
  int incidents = 0;
  // Agent steps at the first window whose mean reached stop_score.
  std::optional<std::int64_t> steps_to_threshold;
};

// Runs A3C with hp.n_workers workers against one shared parameter vector.
// `initial` seeds the shared parameters; otherwise they are initialised
// from cfg.seed.
TrainResult train(const TrainConfig& cfg, const ad::ParamVector<float>* initial = nullptr);

// splitmix64 over the inputs; used for every per-worker/per-episode seed.
std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace nav::train
