// SPDX-License-Identifier: Apache-2.0
#include "nav/train/hyperparams.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "nav/errors.hpp"

namespace nav::train {

void HyperParams::validate() const {
  if (!(lr >= 0)) throw ConfigError("lr must be >= 0");
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError("gamma must be in (0, 1]");
  if (chunk_len <= 0) throw ConfigError("chunk_len must be positive");
  if (n_workers <= 0) throw ConfigError("n_workers must be positive");
  if (!(reward_scale > 0)) throw ConfigError("reward_scale must be positive");
  if (beta_entropy < 0 || beta_d1 < 0 || beta_d2 < 0 || beta_l < 0 || beta_r < 0 || value_coef < 0)
    throw ConfigError("loss weights must be non-negative");
  if (!(rms_decay >= 0 && rms_decay < 1) || !(rms_epsilon > 0))
    throw ConfigError("rmsprop needs decay in [0, 1) and epsilon > 0");
}

namespace {

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::clamp(std::exp(u(rng)), lo, hi);
}

template <std::size_t N>
double pick(std::mt19937_64& rng, const std::array<double, N>& values) {
  std::uniform_int_distribution<std::size_t> d(0, N - 1);
  return values[d(rng)];
}

}  // namespace

HyperParams sample_hyperparams(std::mt19937_64& rng, const HyperParams& base) {
  HyperParams hp = base;
  hp.lr = log_uniform(rng, 1e-4, 5e-4);
  hp.beta_entropy = log_uniform(rng, 1e-4, 1e-3);
  hp.beta_d1 = pick(rng, std::array<double, 3>{3.33, 10, 33});
  hp.beta_d2 = pick(rng, std::array<double, 3>{1, 3.33, 10});
  hp.beta_l = pick(rng, std::array<double, 3>{1, 3.33, 10});
  hp.chunk_len = static_cast<int>(pick(rng, std::array<double, 2>{50, 75}));
  return hp;
}

double transform_reward(double r, const HyperParams& hp) {
  double out = r * hp.reward_scale;
  if (hp.reward_clip) out = std::clamp(out, -1.0, 1.0);
  return out;
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma,
                                    double bootstrap) {
  std::vector<double> out(rewards.size());
  double acc = bootstrap;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    out[t] = acc;
  }
  return out;
}

int reward_class(double r) {
  if (r <= 0) return 0;
  return r < 5 ? 1 : 2;
}

}  // namespace nav::train
