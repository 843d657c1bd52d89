// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nav::analysis {

// One agent step. Position and cell describe the state the agent observed;
// reward and goal events are what its action produced.
struct StepRecord {
  int step = 0;                   // agent step index within the episode
  int env_step = 0;               // env steps elapsed after this step
  std::array<double, 2> position{0, 0};
  int cell = -1;                  // floor id
  int action = 0;
  double reward = 0;
  int goal_events = 0;
  bool respawned = false;
  double value = 0;
  double entropy = 0;
  int loop_label = -1;                 // -1 when not computed
  std::optional<double> loop_logit;    // L head output when present
  std::vector<float> hidden;           // top-layer activations (h2), optional
};

struct EpisodeLog {
  std::string maze_kind;
  std::uint64_t layout_seed = 0;
  std::uint64_t episode_seed = 0;
  int episode = 0;
  int goal_cell = -1;  // floor id of the goal for this episode
  double score = 0;
  std::vector<StepRecord> steps;

  int goals() const;
  // Sum of step rewards equals the score, every step reward covers its goal
  // events (+10 each), and what remains is fruit (+1 apple, +2 strawberry).
  bool reward_conserved() const;
};

// JSON lines: an {"type":"episode",...} header per episode followed by one
// {"type":"step",...} line per agent step.
void write_episode_log(std::ostream& out, const EpisodeLog& log);
void write_episode_logs(std::ostream& out, const std::vector<EpisodeLog>& logs);
// Throws DataError with the offending line number on malformed input.
std::vector<EpisodeLog> read_episode_logs(std::istream& in);

}  // namespace nav::analysis
