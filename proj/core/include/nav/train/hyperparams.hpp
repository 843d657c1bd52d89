// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <span>
#include <vector>

namespace nav::train {

struct HyperParams {
  double lr = 2e-4;
  double beta_entropy = 5e-4;
  double beta_d1 = 0;
  double beta_d2 = 0;
  double beta_l = 0;
  double beta_r = 0;
  double gamma = 0.99;
  int chunk_len = 50;
  bool reward_clip = false;
  double reward_scale = 1.0;
  int n_workers = 16;
  double value_coef = 0.5;
  double grad_clip = 40.0;  // global-norm clip; <= 0 disables
  double rms_decay = 0.99;
  double rms_epsilon = 0.1;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

// Draws lr, beta_entropy, beta_d1, beta_d2, beta_l and chunk_len; every other
// field is copied from `base`.
HyperParams sample_hyperparams(std::mt19937_64& rng, const HyperParams& base = {});

// r * scale, then clamped to [-1, 1] when clipping is on.
double transform_reward(double r, const HyperParams& hp);

// R_t = r_t + gamma * R_{t+1}, seeded with `bootstrap`.
std::vector<double> compute_returns(std::span<const double> rewards, double gamma,
                                    double bootstrap);

// Reward-prediction classes: 0 for r <= 0, 1 for 0 < r < 5, 2 for r >= 5.
inline constexpr int kRewardClasses = 3;
int reward_class(double r);

}  // namespace nav::train
