// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nav/agent/network.hpp"
#include "nav/analysis/decoder.hpp"
#include "nav/analysis/episode_log.hpp"
#include "nav/targets/loop_closure.hpp"
#include "nav/world/world.hpp"

namespace nav::analysis {

struct EvalOptions {
  int episodes = 100;
  std::uint64_t seed = 0;
  bool record_hidden = false;  // store top-layer activations per step
  bool loop_labels = true;
  targets::LoopThresholds loop;
};

// Runs the agent's own (sampled) policy. Parameters are only read.
std::vector<EpisodeLog> run_episodes(const agent::Network<float>& net,
                                     const ad::ParamVector<float>& params,
                                     const world::MazeLayout& layout,
                                     const world::EnvConfig& env, const EvalOptions& opt);

// Uniformly random actions; the random-policy baseline.
std::vector<EpisodeLog> run_random_episodes(const world::MazeLayout& layout,
                                            const world::EnvConfig& env, const EvalOptions& opt);

// (activation, floor id) pairs from logs recorded with record_hidden.
Dataset dataset_from_logs(const std::vector<EpisodeLog>& logs);

// Runs n episodes and returns top-layer activations (h2, or f_t for the
// feed-forward agent) with the cell the agent stood in.
Dataset collect_dataset(const agent::Network<float>& net, const ad::ParamVector<float>& params,
                        const world::MazeLayout& layout, const world::EnvConfig& env,
                        int n_episodes, std::uint64_t seed);

// CSV: episode,step,goal,h0..h{n-1}. Throws UsageError for the feed-forward
// variant or logs without activations.
void export_activations(const agent::ArchitectureSpec& spec, const std::vector<EpisodeLog>& logs,
                        std::ostream& out);

// Predicted (sigmoid(logit) > 0.5) and true loop labels over all steps that
// have both.
struct LoopPairs {
  std::vector<int> predicted, truth;
};
LoopPairs loop_pairs(const std::vector<EpisodeLog>& logs);

}  // namespace nav::analysis
