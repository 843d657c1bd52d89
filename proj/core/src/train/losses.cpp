// SPDX-License-Identifier: Apache-2.0
#include "nav/train/losses.hpp"

#include <array>

#include "nav/errors.hpp"

namespace nav::train {

using ad::Tape;
using ad::Var;

namespace {

template <typename T>
Var zero(Tape<T>& tape) {
  const T z = T(0);
  return tape.constant(std::span<const T>(&z, 1));
}

template <typename T>
Var sum_terms(Tape<T>& tape, const std::vector<Var>& terms, const std::vector<T>& weights) {
  if (terms.empty()) return zero(tape);
  return tape.weighted_sum(terms, weights);
}

}  // namespace

template <typename T>
Var a3c_loss(Tape<T>& tape, std::span<const StepOutputs> steps, std::span<const int> actions,
             std::span<const double> returns, const HyperParams& hp,
             std::span<const double> advantages) {
  if (steps.size() != actions.size() || steps.size() != returns.size())
    throw UsageError("a3c_loss: steps, actions and returns differ in length");
  if (!advantages.empty() && advantages.size() != steps.size())
    throw UsageError("a3c_loss: advantages differ in length");
  std::vector<Var> terms;
  std::vector<T> weights;
  terms.reserve(3 * steps.size());
  weights.reserve(3 * steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const T ret = static_cast<T>(returns[t]);
    const T adv = advantages.empty() ? ret - tape.scalar(steps[t].value) : static_cast<T>(advantages[t]);
    terms.push_back(tape.categorical_nll(steps[t].policy, actions[t]));
    weights.push_back(adv);
    terms.push_back(tape.mse(steps[t].value, std::span<const T>(&ret, 1)));
    weights.push_back(static_cast<T>(hp.value_coef));
    if (hp.beta_entropy != 0) {
      terms.push_back(tape.policy_entropy(steps[t].policy));
      weights.push_back(static_cast<T>(-hp.beta_entropy));
    }
  }
  return sum_terms(tape, terms, weights);
}

template <typename T>
Var aux_loss(Tape<T>& tape, const agent::ArchitectureSpec& spec, std::span<const StepOutputs> steps,
             std::span<const AuxTargets> targets, const HyperParams& hp) {
  if (steps.size() != targets.size())
    throw UsageError("aux_loss: steps and targets differ in length");
  std::vector<Var> terms;
  std::vector<T> weights;
  const bool regress = spec.depth_mode == agent::DepthMode::kRegress;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto& s = steps[t];
    const auto& tg = targets[t];
    const bool want_depth = (spec.heads.d1 && hp.beta_d1 != 0) || (spec.heads.d2 && hp.beta_d2 != 0);
    if (want_depth && tg.depth == nullptr) throw UsageError("aux_loss: depth target missing");
    auto depth = [&](Var logits) {
      if (!regress) return tape.categorical_nll(logits, tg.depth->band);
      std::array<T, targets::kDepthPixels> v;
      for (int i = 0; i < targets::kDepthPixels; ++i) v[i] = static_cast<T>(tg.depth->value[i]);
      return tape.mse(logits, v);
    };
    if (spec.heads.d1 && hp.beta_d1 != 0) {
      terms.push_back(depth(s.d1));
      weights.push_back(static_cast<T>(hp.beta_d1));
    }
    if (spec.heads.d2 && hp.beta_d2 != 0) {
      terms.push_back(depth(s.d2));
      weights.push_back(static_cast<T>(hp.beta_d2));
    }
    if (spec.heads.loop && hp.beta_l != 0) {
      if (tg.loop_label < 0) throw UsageError("aux_loss: loop label missing");
      terms.push_back(tape.bernoulli_nll(s.loop, static_cast<T>(tg.loop_label)));
      weights.push_back(static_cast<T>(hp.beta_l));
    }
  }
  return sum_terms(tape, terms, weights);
}

template <typename T>
Var reward_pred_loss(Tape<T>& tape, const agent::Network<T>& net,
                     const typename agent::Network<T>::Bound& bound, const ReplayBuffer& buffer,
                     std::span<const std::size_t> sample) {
  if (sample.empty()) return zero(tape);
  std::vector<Var> terms;
  std::vector<T> weights(sample.size(), T(1) / static_cast<T>(sample.size()));
  std::vector<T> frame;
  for (std::size_t idx : sample) {
    const auto& item = buffer.item(idx);
    frame.assign(item.frame.begin(), item.frame.end());
    terms.push_back(tape.categorical_nll(net.reward_logits(tape, bound, frame), item.cls));
  }
  return tape.weighted_sum(terms, weights);
}

template Var a3c_loss<float>(Tape<float>&, std::span<const StepOutputs>, std::span<const int>,
                             std::span<const double>, const HyperParams&, std::span<const double>);
template Var a3c_loss<double>(Tape<double>&, std::span<const StepOutputs>, std::span<const int>,
                              std::span<const double>, const HyperParams&, std::span<const double>);
template Var aux_loss<float>(Tape<float>&, const agent::ArchitectureSpec&,
                             std::span<const StepOutputs>, std::span<const AuxTargets>,
                             const HyperParams&);
template Var aux_loss<double>(Tape<double>&, const agent::ArchitectureSpec&,
                              std::span<const StepOutputs>, std::span<const AuxTargets>,
                              const HyperParams&);
template Var reward_pred_loss<float>(Tape<float>&, const agent::Network<float>&,
                                     const agent::Network<float>::Bound&, const ReplayBuffer&,
                                     std::span<const std::size_t>);
template Var reward_pred_loss<double>(Tape<double>&, const agent::Network<double>&,
                                      const agent::Network<double>::Bound&, const ReplayBuffer&,
                                      std::span<const std::size_t>);

}  // namespace nav::train
