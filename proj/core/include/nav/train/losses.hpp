// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nav/agent/network.hpp"
#include "nav/autodiff/tape.hpp"
#include "nav/targets/depth.hpp"
#include "nav/train/hyperparams.hpp"
#include "nav/train/replay_buffer.hpp"

namespace nav::train {

// Per-step head outputs recorded during a rollout.
struct StepOutputs {
  ad::Var policy, value, d1, d2, loop;
};

struct AuxTargets {
  const targets::DepthTarget* depth = nullptr;  // required by D1/D2
  int loop_label = -1;                          // required by L
};

// sum_t [ -log pi(a_t) A_t + value_coef (R_t - V_t)^2 - beta_entropy H(pi_t) ]
// with A_t = R_t - V_t read off the tape (no gradient through it), or taken
// from `advantages` when that is non-empty.
template <typename T>
ad::Var a3c_loss(ad::Tape<T>& tape, std::span<const StepOutputs> steps,
                 std::span<const int> actions, std::span<const double> returns,
                 const HyperParams& hp, std::span<const double> advantages = {});

// beta_d1 * depth(D1) + beta_d2 * depth(D2) + beta_l * bernoulli(L), summed
// over steps. Depth is the mean categorical NLL over the 64 pixels, or their
// MSE in regress mode. Heads absent from the spec contribute nothing.
template <typename T>
ad::Var aux_loss(ad::Tape<T>& tape, const agent::ArchitectureSpec& spec,
                 std::span<const StepOutputs> steps, std::span<const AuxTargets> targets,
                 const HyperParams& hp);

// Mean categorical NLL of the reward head over the sampled replay items;
// zero when nothing was sampled.
template <typename T>
ad::Var reward_pred_loss(ad::Tape<T>& tape, const agent::Network<T>& net,
                         const typename agent::Network<T>::Bound& bound, const ReplayBuffer& buffer,
                         std::span<const std::size_t> sample);

}  // namespace nav::train
