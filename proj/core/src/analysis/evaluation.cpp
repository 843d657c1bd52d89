// SPDX-License-Identifier: Apache-2.0
#include "nav/analysis/evaluation.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "nav/errors.hpp"
#include "nav/train/trainer.hpp"

namespace nav::analysis {

namespace {

constexpr std::uint64_t kEvalStream = 0xe7a1ULL;

double entropy_of(std::span<const float> logits) {
  double mx = logits[0];
  for (float l : logits) mx = std::max<double>(mx, l);
  double z = 0;
  for (float l : logits) z += std::exp(l - mx);
  const double logz = std::log(z) + mx;
  double h = 0;
  for (float l : logits) h -= std::exp(l - logz) * (l - logz);
  return h;
}

EpisodeLog start_log(const world::MazeEnv& env, std::uint64_t episode_seed, int episode) {
  EpisodeLog log;
  log.maze_kind = std::string(world::to_string(env.layout().kind));
  log.layout_seed = env.layout().seed;
  log.episode_seed = episode_seed;
  log.episode = episode;
  log.goal_cell = env.layout().floor_id(env.state().goal_cell);
  return log;
}

// Fills the env-side fields of a step record after the action was applied.
void finish_step(StepRecord& s, const world::MazeEnv& env) {
  s.env_step = env.state().env_step;
  s.reward = env.last_step().reward;
  s.goal_events = env.last_step().goal_events;
  s.respawned = env.last_step().respawned;
}

}  // namespace

std::vector<EpisodeLog> run_episodes(const agent::Network<float>& net,
                                     const ad::ParamVector<float>& params,
                                     const world::MazeLayout& layout,
                                     const world::EnvConfig& env_cfg, const EvalOptions& opt) {
  const auto& spec = net.spec();
  if (params.size() != net.make_params().size())
    throw UsageError("parameters do not match the architecture");
  // The tape binds parameters mutably (for gradients); evaluation never
  // runs backward, so a private copy keeps the caller's vector untouched.
  ad::ParamVector<float> local = net.make_params();
  std::copy(params.flat().begin(), params.flat().end(), local.flat().begin());

  std::vector<EpisodeLog> logs;
  world::MazeEnv env(layout, env_cfg);
  ad::Tape<float> tape;
  for (int e = 0; e < opt.episodes; ++e) {
    const std::uint64_t seed = train::derive_seed(opt.seed, kEvalStream, static_cast<std::uint64_t>(e));
    std::mt19937_64 rng(train::derive_seed(seed, 1));
    env.reset(seed);
    EpisodeLog log = start_log(env, seed, e);
    targets::LoopLabeler labeler(opt.loop);
    auto state = net.zero_state();
    int t = 0;
    while (!env.done()) {
      tape.clear();
      const auto bound = net.bind(tape, local);
      const auto sv = net.state_vars(tape, state);
      const auto in = agent::encode_observation<float>(env.observation(), spec, env_cfg.render);
      const auto v = net.forward(tape, bound, in, sv);
      const auto logits = tape.value(v.policy);

      StepRecord s;
      s.step = t++;
      const auto gt = world::ground_truth_position(env.state(), layout);
      s.position = gt.p;
      s.cell = gt.cell;
      s.value = tape.scalar(v.value);
      s.entropy = entropy_of(logits);
      if (opt.loop_labels) s.loop_label = labeler.push(gt.p);
      if (v.loop.valid()) s.loop_logit = tape.scalar(v.loop);
      if (opt.record_hidden) {
        const auto h = tape.value(spec.recurrent() ? v.next.h2 : v.features);
        s.hidden.assign(h.begin(), h.end());
      }
      s.action = agent::act<float>(logits, rng);
      state = net.read_state(tape, v.next);
      env.step(world::Action{s.action});
      finish_step(s, env);
      log.steps.push_back(std::move(s));
    }
    log.score = env.state().total_reward;
    logs.push_back(std::move(log));
  }
  return logs;
}

std::vector<EpisodeLog> run_random_episodes(const world::MazeLayout& layout,
                                            const world::EnvConfig& env_cfg,
                                            const EvalOptions& opt) {
  std::vector<EpisodeLog> logs;
  world::EnvConfig cfg = env_cfg;
  world::MazeEnv env(layout, cfg);
  for (int e = 0; e < opt.episodes; ++e) {
    const std::uint64_t seed = train::derive_seed(opt.seed, kEvalStream, static_cast<std::uint64_t>(e));
    std::mt19937_64 rng(train::derive_seed(seed, 2));
    std::uniform_int_distribution<int> pick(0, world::kNumActions - 1);
    env.reset(seed);
    EpisodeLog log = start_log(env, seed, e);
    targets::LoopLabeler labeler(opt.loop);
    int t = 0;
    while (!env.done()) {
      StepRecord s;
      s.step = t++;
      const auto gt = world::ground_truth_position(env.state(), layout);
      s.position = gt.p;
      s.cell = gt.cell;
      s.entropy = std::log(static_cast<double>(world::kNumActions));
      if (opt.loop_labels) s.loop_label = labeler.push(gt.p);
      s.action = pick(rng);
      env.step(world::Action{s.action});
      finish_step(s, env);
      log.steps.push_back(std::move(s));
    }
    log.score = env.state().total_reward;
    logs.push_back(std::move(log));
  }
  return logs;
}

Dataset dataset_from_logs(const std::vector<EpisodeLog>& logs) {
  Dataset d;
  for (const auto& log : logs)
    for (const auto& s : log.steps) {
      if (s.hidden.empty()) throw UsageError("episode log has no activations");
      d.add(s.hidden, s.cell, log.episode);
    }
  return d;
}

Dataset collect_dataset(const agent::Network<float>& net, const ad::ParamVector<float>& params,
                        const world::MazeLayout& layout, const world::EnvConfig& env,
                        int n_episodes, std::uint64_t seed) {
  EvalOptions opt;
  opt.episodes = n_episodes;
  opt.seed = seed;
  opt.record_hidden = true;
  opt.loop_labels = false;
  return dataset_from_logs(run_episodes(net, params, layout, env, opt));
}

void export_activations(const agent::ArchitectureSpec& spec, const std::vector<EpisodeLog>& logs,
                        std::ostream& out) {
  if (!spec.recurrent()) throw UsageError("the feed-forward agent has no cell activations");
  const std::size_t width = static_cast<std::size_t>(spec.lstm2_width);
  out << "episode,step,goal";
  for (std::size_t i = 0; i < width; ++i) out << ",h" << i;
  out << '\n';
  for (const auto& log : logs)
    for (const auto& s : log.steps) {
      if (s.hidden.size() != width)
        throw UsageError("episode " + std::to_string(log.episode) + " step " +
                         std::to_string(s.step) + " has " + std::to_string(s.hidden.size()) +
                         " activations, expected " + std::to_string(width));
      out << log.episode << ',' << s.step << ',' << log.goal_cell;
      for (float h : s.hidden) out << ',' << h;
      out << '\n';
    }
}

LoopPairs loop_pairs(const std::vector<EpisodeLog>& logs) {
  LoopPairs p;
  for (const auto& log : logs)
    for (const auto& s : log.steps)
      if (s.loop_logit && s.loop_label >= 0) {
        p.predicted.push_back(*s.loop_logit > 0 ? 1 : 0);  // sigmoid(z) > 0.5 <=> z > 0
        p.truth.push_back(s.loop_label);
      }
  return p;
}

}  // namespace nav::analysis
