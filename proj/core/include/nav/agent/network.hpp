// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "nav/agent/architecture.hpp"
#include "nav/autodiff/param_vector.hpp"
#include "nav/autodiff/tape.hpp"
#include "nav/world/world.hpp"

namespace nav::agent {

// Network input for one agent step.
template <typename T>
struct NetInput {
  std::vector<T> image;  // C x H x W in [0,1]
  std::array<T, world::kVelocityDims> velocity{};
  std::array<T, world::kNumActions> prev_action{};
  T prev_reward = T(0);
};

template <typename T>
NetInput<T> encode_observation(const world::Observation& obs, const ArchitectureSpec& spec,
                               const world::RenderConfig& render);

// (h, c) per LSTM. LSTM A3C keeps its single LSTM in (h2, c2); h1/c1 are
// empty unless the variant is Nav A3C.
template <typename T>
struct RecurrentState {
  std::vector<T> h1, c1, h2, c2;
  bool operator==(const RecurrentState&) const = default;
};

template <typename T>
struct ForwardOut {
  std::array<T, world::kNumActions> policy_logits{};
  T value = T(0);
  std::optional<std::vector<T>> d1;  // 64 x 8 logits, or 64 reals in regress mode
  std::optional<std::vector<T>> d2;
  std::optional<T> loop_logit;
  std::optional<std::array<T, 3>> reward_logits;
};

template <typename T>
class Network {
 public:
  struct Slices {
    ad::ParamSlice conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b;
    ad::ParamSlice lstm1_w, lstm1_b, lstm2_w, lstm2_b;
    ad::ParamSlice policy_w, policy_b, value_w, value_b;
    ad::ParamSlice d1_hw, d1_hb, d1_ow, d1_ob;
    ad::ParamSlice d2_hw, d2_hb, d2_ow, d2_ob;
    ad::ParamSlice loop_hw, loop_hb, loop_ow, loop_ob;
    ad::ParamSlice rew_hw, rew_hb, rew_ow, rew_ob;
  };

  // Parameters as tape leaves. Bind once per tape; reuse across steps.
  struct Bound {
    ad::Var conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b;
    ad::Var lstm1_w, lstm1_b, lstm2_w, lstm2_b;
    ad::Var policy_w, policy_b, value_w, value_b;
    ad::Var d1_hw, d1_hb, d1_ow, d1_ob;
    ad::Var d2_hw, d2_hb, d2_ow, d2_ob;
    ad::Var loop_hw, loop_hb, loop_ow, loop_ob;
    ad::Var rew_hw, rew_hb, rew_ow, rew_ob;
  };

  struct StateVars {
    ad::Var h1, c1, h2, c2;
  };

  struct Vars {
    ad::Var features;  // f_t
    ad::Var policy;
    ad::Var value;
    ad::Var d1, d2, loop;
    StateVars next;
  };

  // Throws ConfigError when the spec is invalid.
  explicit Network(ArchitectureSpec spec);

  const ArchitectureSpec& spec() const { return spec_; }
  const Slices& slices() const { return slices_; }

  // Registry with all-zero values, in a fixed order.
  ad::ParamVector<T> make_params() const;
  // Orthogonal recurrent blocks, fan-in uniform elsewhere, zero biases.
  ad::ParamVector<T> init_params(std::mt19937_64& rng) const;

  RecurrentState<T> zero_state() const;
  // Throws UsageError when the widths do not match the spec.
  void check_state(const RecurrentState<T>& s) const;

  Bound bind(ad::Tape<T>& tape, ad::ParamVector<T>& params) const;
  StateVars state_vars(ad::Tape<T>& tape, const RecurrentState<T>& s) const;
  RecurrentState<T> read_state(const ad::Tape<T>& tape, const StateVars& v) const;

  // f_t from an image (C x H x W).
  ad::Var encode(ad::Tape<T>& tape, const Bound& p, ad::Var image) const;
  Vars forward(ad::Tape<T>& tape, const Bound& p, const NetInput<T>& in,
               const StateVars& state) const;
  // Reward-class logits (3) for one image.
  ad::Var reward_logits(ad::Tape<T>& tape, const Bound& p, std::span<const T> image) const;

  ForwardOut<T> read_out(const ad::Tape<T>& tape, const Vars& v) const;

  // One step on a scratch tape.
  std::pair<ForwardOut<T>, RecurrentState<T>> step(ad::ParamVector<T>& params,
                                                   const NetInput<T>& in,
                                                   const RecurrentState<T>& state) const;

 private:
  ArchitectureSpec spec_;
  Slices slices_;
};

extern template class Network<float>;
extern template class Network<double>;

// Samples from softmax(logits).
template <typename T>
int act(std::span<const T> logits, std::mt19937_64& rng);

}  // namespace nav::agent
