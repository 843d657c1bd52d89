// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nav/agent/architecture.hpp"
#include "nav/train/hyperparams.hpp"
#include "nav/world/maze_layout.hpp"
#include "nav/world/world.hpp"

namespace nav::runner {

inline constexpr int kMaxSweep = 64;

struct ExperimentConfig {
  world::MazeKind maze_kind = world::MazeKind::kStaticSmall;
  std::uint64_t maze_seed = 1;
  std::string layout_file;  // optional; overrides kind/seed generation
  world::EnvConfig env;
  agent::ArchitectureSpec arch;
  train::HyperParams hp;
  int sweep = 0;  // > 0: sample that many hyper-parameter sets
  std::uint64_t seed = 1;
  bool deterministic = false;
  std::int64_t max_agent_steps = 25'000'000;
  std::int64_t window_env_steps = 50'000;
  std::int64_t checkpoint_every = 0;
  std::optional<double> stop_score;
  int eval_episodes = 100;
  int port = 7878;
  bool raw_depth = false;  // serve-env sends the raw depth buffer
  std::string out_dir = "runs/default";

  // Throws ConfigError.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// TOML-style text: [section] headers, `key = value` lines, '#' comments.
// Values are integers, reals, true/false or "quoted strings". Errors are
// ConfigError with a "line N: ..." prefix.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

// The layout the config describes (generated, or read from layout_file).
world::MazeLayout make_layout(const ExperimentConfig& cfg);

}  // namespace nav::runner
