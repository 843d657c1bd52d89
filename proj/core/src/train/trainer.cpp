// SPDX-License-Identifier: Apache-2.0
#include "nav/train/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include "nav/agent/network.hpp"
#include "nav/autodiff/rmsprop.hpp"
#include "nav/autodiff/tape.hpp"
#include "nav/errors.hpp"
#include "nav/targets/depth.hpp"
#include "nav/train/losses.hpp"
#include "nav/train/replay_buffer.hpp"

namespace nav::train {

std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(a) ^ b) ^ c);
}

namespace {

using Clock = std::chrono::steady_clock;
using agent::Network;
using ad::ParamVector;
using ad::Tape;
using ad::Var;

double entropy_of(std::span<const float> logits) {
  double mx = logits[0];
  for (float l : logits) mx = std::max<double>(mx, l);
  double z = 0;
  for (float l : logits) z += std::exp(l - mx);
  const double logz = std::log(z) + mx;
  double h = 0;
  for (float l : logits) {
    const double lp = l - logz;
    h -= std::exp(lp) * lp;
  }
  return h;
}

struct Shared {
  const TrainConfig& cfg;
  Network<float> net;
  ParamVector<float> params;
  ad::RmsPropState<float> rms;
  std::atomic<std::int64_t> env_steps{0};
  std::atomic<std::int64_t> agent_steps{0};
  std::atomic<std::int64_t> episodes{0};
  std::atomic<int> incidents{0};
  std::atomic<bool> stop{false};
  Clock::time_point start = Clock::now();

  std::mutex mu;  // guards everything below
  std::int64_t next_window_end = 0;
  std::int64_t next_checkpoint = 0;
  double pending_score = 0;
  int pending_episodes = 0;
  double pending_entropy = 0;
  std::int64_t pending_entropy_n = 0;
  std::vector<CurvePoint> curve;
  std::optional<std::int64_t> steps_to_threshold;

  explicit Shared(const TrainConfig& c) : cfg(c), net(c.arch) {}

  std::int64_t max_env_steps() const { return cfg.max_agent_steps * world::kActionRepeat; }

  // Folds one chunk's bookkeeping into the curve log.
  void report(std::int64_t chunk_env_steps, std::int64_t chunk_agent_steps,
              const std::vector<double>& finished_scores, double entropy_sum) {
    const std::int64_t total_env = env_steps.fetch_add(chunk_env_steps) + chunk_env_steps;
    const std::int64_t total_agent = agent_steps.fetch_add(chunk_agent_steps) + chunk_agent_steps;
    episodes.fetch_add(static_cast<std::int64_t>(finished_scores.size()));

    std::lock_guard lock(mu);
    for (double s : finished_scores) pending_score += s;
    pending_episodes += static_cast<int>(finished_scores.size());
    pending_entropy += entropy_sum;
    pending_entropy_n += chunk_agent_steps;

    while (total_env >= next_window_end) {
      if (pending_episodes > 0) {
        CurvePoint p;
        p.agent_steps = next_window_end / world::kActionRepeat;
        p.mean_score = pending_score / pending_episodes;
        p.episodes = pending_episodes;
        p.wall_clock_s = cfg.deterministic
                             ? 0.0
                             : std::chrono::duration<double>(Clock::now() - start).count();
        p.mean_entropy = pending_entropy_n ? pending_entropy / pending_entropy_n : 0.0;
        curve.push_back(p);
        if (cfg.on_curve_point) cfg.on_curve_point(p);
        if (cfg.stop_score && !steps_to_threshold && p.mean_score >= *cfg.stop_score) {
          steps_to_threshold = p.agent_steps;
          stop = true;
        }
        pending_score = 0;
        pending_episodes = 0;
        pending_entropy = 0;
        pending_entropy_n = 0;
      }
      next_window_end += cfg.window_env_steps;
    }

    if (cfg.checkpoint_every > 0 && cfg.on_checkpoint) {
      bool due = false;
      while (total_agent >= next_checkpoint) {
        due = true;
        next_checkpoint += cfg.checkpoint_every;
      }
      if (due) {
        ParamVector<float> snap = net.make_params();
        ad::snapshot_into(params, snap);
        cfg.on_checkpoint(total_agent, snap);
      }
    }
    if (total_agent >= cfg.max_agent_steps) stop = true;
  }
};

class Worker {
 public:
  Worker(Shared& shared, int id)
      : sh_(shared),
        cfg_(shared.cfg),
        id_(id),
        env_(cfg_.layout, cfg_.env),
        local_(sh_.net.make_params()),
        rng_(derive_seed(cfg_.seed, static_cast<std::uint64_t>(id), 0xac7ULL)),
        replay_(cfg_.replay_capacity),
        labeler_(cfg_.loop) {
    depth_.reserve(cfg_.hp.chunk_len);
    start_episode();
  }

  void run_chunk() {
    const auto& spec = sh_.net.spec();
    const auto& hp = cfg_.hp;
    ad::snapshot_into(sh_.params, local_);
    tape_.clear();
    const auto bound = sh_.net.bind(tape_, local_);
    auto sv = sh_.net.state_vars(tape_, state_);

    steps_.clear();
    actions_.clear();
    rewards_.clear();
    depth_.clear();
    aux_.clear();
    std::vector<double> finished;
    double entropy_sum = 0;
    std::int64_t env_steps = 0;
    const bool want_depth = (spec.heads.d1 && hp.beta_d1 != 0) || (spec.heads.d2 && hp.beta_d2 != 0);
    const bool want_loop = spec.heads.loop && hp.beta_l != 0;
    const bool want_replay = spec.heads.reward && hp.beta_r != 0;
    bool episode_over = false;

    try {
      for (int t = 0; t < hp.chunk_len; ++t) {
        const auto& obs = env_.observation();
        const auto in = agent::encode_observation<float>(obs, spec, cfg_.env.render);
        const auto v = sh_.net.forward(tape_, bound, in, sv);
        const auto logits = tape_.value(v.policy);
        const int a = agent::act<float>(logits, rng_);
        entropy_sum += entropy_of(logits);

        AuxTargets aux;
        if (want_depth) {
          const auto bytes = targets::depth_to_bytes(obs.frame.depth, cfg_.env.render.near_plane,
                                                     cfg_.env.render.max_range);
          depth_.push_back(targets::make_depth_target(bytes, obs.frame.height, obs.frame.width));
          aux.depth = &depth_.back();
        }
        if (want_loop) {
          const auto gt = world::ground_truth_position(env_.state(), env_.layout());
          aux.loop_label = labeler_.push(gt.p);
        }

        const int before = env_.state().env_step;
        env_.step(world::Action{a});
        const double r = env_.last_step().reward;
        env_steps += env_.state().env_step - before;
        score_ += r;
        if (want_replay) replay_.push(in.image, reward_class(r));

        steps_.push_back({v.policy, v.value, v.d1, v.d2, v.loop});
        actions_.push_back(a);
        rewards_.push_back(transform_reward(r, hp));
        aux_.push_back(aux);
        sv = v.next;
        if (env_.done()) {
          episode_over = true;
          break;
        }
      }
    } catch (const std::exception& e) {
      // Environment fault: drop the partial chunk and start a new episode.
      sh_.incidents.fetch_add(1);
      if (cfg_.on_incident)
        cfg_.on_incident("worker " + std::to_string(id_) + ": " + e.what());
      start_episode();
      sh_.report(env_steps, static_cast<std::int64_t>(steps_.size()), {}, entropy_sum);
      return;
    }

    double bootstrap = 0;
    if (!episode_over) {
      const auto in = agent::encode_observation<float>(env_.observation(), spec, cfg_.env.render);
      bootstrap = tape_.scalar(sh_.net.forward(tape_, bound, in, sv).value);
    }
    const auto returns = compute_returns(rewards_, hp.gamma, bootstrap);

    std::vector<Var> terms{a3c_loss<float>(tape_, steps_, actions_, returns, hp)};
    std::vector<float> weights{1.0f};
    if (want_depth || want_loop) {
      terms.push_back(aux_loss<float>(tape_, spec, steps_, aux_, hp));
      weights.push_back(1.0f);
    }
    if (want_replay) {
      const auto sample = replay_.sample(cfg_.replay_batch, rng_);
      terms.push_back(reward_pred_loss<float>(tape_, sh_.net, bound, replay_, sample));
      weights.push_back(static_cast<float>(hp.beta_r));
    }
    const Var loss = tape_.weighted_sum(terms, weights);
    tape_.backward(loss);
    ad::clip_by_global_norm<float>(local_.grad(), static_cast<float>(hp.grad_clip));
    ad::rmsprop_apply<float>(sh_.params.flat(), local_.grad(), sh_.rms, static_cast<float>(hp.lr));
    local_.zero_grad();

    if (episode_over) {
      finished.push_back(score_);
      start_episode();
    } else {
      state_ = sh_.net.read_state(tape_, sv);
    }
    sh_.report(env_steps, static_cast<std::int64_t>(steps_.size()), finished, entropy_sum);
  }

 private:
  void start_episode() {
    env_.reset(derive_seed(cfg_.seed, static_cast<std::uint64_t>(id_) + 1, episode_index_++));
    state_ = sh_.net.zero_state();
    labeler_.reset();
    score_ = 0;
  }

  Shared& sh_;
  const TrainConfig& cfg_;
  int id_;
  world::MazeEnv env_;
  ParamVector<float> local_;
  std::mt19937_64 rng_;
  ReplayBuffer replay_;
  targets::LoopLabeler labeler_;
  Tape<float> tape_;
  agent::RecurrentState<float> state_;
  std::uint64_t episode_index_ = 0;
  double score_ = 0;

  std::vector<StepOutputs> steps_;
  std::vector<int> actions_;
  std::vector<double> rewards_;
  std::vector<targets::DepthTarget> depth_;
  std::vector<AuxTargets> aux_;
};

}  // namespace

TrainResult train(const TrainConfig& cfg, const ad::ParamVector<float>* initial) {
  cfg.hp.validate();
  cfg.loop.validate();
  if (cfg.window_env_steps <= 0) throw ConfigError("curve window must be positive");
  if (cfg.max_agent_steps < 0) throw ConfigError("max agent steps must be >= 0");
  if (cfg.env.render.height != cfg.arch.image_height || cfg.env.render.width != cfg.arch.image_width)
    throw ConfigError("render size does not match the network input size");

  Shared sh(cfg);
  if (initial) {
    sh.params = sh.net.make_params();
    if (initial->size() != sh.params.size())
      throw ConfigError("initial parameters do not match the architecture");
    std::copy(initial->flat().begin(), initial->flat().end(), sh.params.flat().begin());
  } else {
    std::mt19937_64 init_rng(derive_seed(cfg.seed, 0x1a17ULL));
    sh.params = sh.net.init_params(init_rng);
  }
  sh.rms = ad::RmsPropState<float>(sh.params.size(), static_cast<float>(cfg.hp.rms_decay),
                                   static_cast<float>(cfg.hp.rms_epsilon));
  sh.next_window_end = cfg.window_env_steps;
  sh.next_checkpoint = cfg.checkpoint_every;

  const int n = cfg.hp.n_workers;
  std::vector<std::unique_ptr<Worker>> workers;
  for (int i = 0; i < n; ++i) workers.push_back(std::make_unique<Worker>(sh, i));

  if (cfg.max_agent_steps > 0) {
    if (cfg.deterministic || n == 1) {
      while (!sh.stop)
        for (auto& w : workers) {
          if (sh.stop) break;
          w->run_chunk();
        }
    } else {
      std::vector<std::thread> threads;
      std::exception_ptr failure;
      std::mutex failure_mu;
      for (auto& w : workers)
        threads.emplace_back([&, wp = w.get()] {
          try {
            while (!sh.stop) wp->run_chunk();
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            sh.stop = true;
          }
        });
      for (auto& t : threads) t.join();
      if (failure) std::rethrow_exception(failure);
    }
  }

  TrainResult r;
  r.params = std::move(sh.params);
  r.curve = std::move(sh.curve);
  r.env_steps = sh.env_steps;
  r.agent_steps = sh.agent_steps;
  r.episodes = sh.episodes;
  r.incidents = sh.incidents;
  r.steps_to_threshold = sh.steps_to_threshold;
  return r;
}

}  // namespace nav::train
