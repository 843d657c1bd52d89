// SPDX-License-Identifier: Apache-2.0
#include "nav/agent/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nav/autodiff/init.hpp"
#include "nav/errors.hpp"
#include "nav/targets/depth.hpp"

namespace nav::agent {

using ad::ParamSlice;
using ad::ParamVector;
using ad::Shape;
using ad::Tape;
using ad::Var;

namespace {

constexpr int kRewardClasses = 3;

template <typename T>
void register_all(const ArchitectureSpec& s, ParamVector<T>& pv,
                  typename Network<T>::Slices& out) {
  const int c = s.input_channels();
  out.conv1_w = pv.add("conv1.w", Shape{s.conv1.filters, c, s.conv1.kernel, s.conv1.kernel});
  out.conv1_b = pv.add("conv1.b", Shape{s.conv1.filters});
  out.conv2_w = pv.add("conv2.w",
                       Shape{s.conv2.filters, s.conv1.filters, s.conv2.kernel, s.conv2.kernel});
  out.conv2_b = pv.add("conv2.b", Shape{s.conv2.filters});
  out.fc_w = pv.add("fc.w", Shape{s.fc_width, s.conv_out_size()});
  out.fc_b = pv.add("fc.b", Shape{s.fc_width});

  const int f = s.fc_width;
  const int top = s.top_width();
  if (s.variant == Variant::kLstm1) {
    const int n = s.lstm2_width;
    out.lstm2_w = pv.add("lstm.w", Shape{4 * n, f + n});
    out.lstm2_b = pv.add("lstm.b", Shape{4 * n});
  } else if (s.variant == Variant::kNav2Lstm) {
    const int n1 = s.lstm1_width;
    const int n2 = s.lstm2_width;
    out.lstm1_w = pv.add("lstm1.w", Shape{4 * n1, f + 1 + n1});
    out.lstm1_b = pv.add("lstm1.b", Shape{4 * n1});
    const int in2 = n1 + f + world::kVelocityDims + world::kNumActions;
    out.lstm2_w = pv.add("lstm2.w", Shape{4 * n2, in2 + n2});
    out.lstm2_b = pv.add("lstm2.b", Shape{4 * n2});
  }
  out.policy_w = pv.add("policy.w", Shape{world::kNumActions, top});
  out.policy_b = pv.add("policy.b", Shape{world::kNumActions});
  out.value_w = pv.add("value.w", Shape{1, top});
  out.value_b = pv.add("value.b", Shape{1});

  const int hid = s.aux_hidden;
  const int dout = s.depth_outputs();
  auto mlp = [&](const std::string& name, int in, int n_out, ParamSlice& hw, ParamSlice& hb,
                 ParamSlice& ow, ParamSlice& ob) {
    hw = pv.add(name + ".hidden.w", Shape{hid, in});
    hb = pv.add(name + ".hidden.b", Shape{hid});
    ow = pv.add(name + ".out.w", Shape{n_out, hid});
    ob = pv.add(name + ".out.b", Shape{n_out});
  };
  if (s.heads.d1) mlp("d1", f, dout, out.d1_hw, out.d1_hb, out.d1_ow, out.d1_ob);
  if (s.heads.d2) mlp("d2", top, dout, out.d2_hw, out.d2_hb, out.d2_ow, out.d2_ob);
  if (s.heads.loop) mlp("loop", top, 1, out.loop_hw, out.loop_hb, out.loop_ow, out.loop_ob);
  if (s.heads.reward)
    mlp("reward", f, kRewardClasses, out.rew_hw, out.rew_hb, out.rew_ow, out.rew_ob);
}

}  // namespace

template <typename T>
NetInput<T> encode_observation(const world::Observation& obs, const ArchitectureSpec& spec,
                               const world::RenderConfig& render) {
  const auto& fr = obs.frame;
  if (fr.height != spec.image_height || fr.width != spec.image_width)
    throw UsageError("observation is " + std::to_string(fr.height) + "x" +
                     std::to_string(fr.width) + ", network expects " +
                     std::to_string(spec.image_height) + "x" + std::to_string(spec.image_width));
  NetInput<T> in;
  const std::size_t plane = static_cast<std::size_t>(fr.height) * fr.width;
  in.image.resize(plane * spec.input_channels());
  constexpr T kInv255 = T(1) / T(255);
  for (std::size_t i = 0; i < 3 * plane; ++i) in.image[i] = static_cast<T>(fr.rgb[i]) * kInv255;
  if (spec.input_mode == InputMode::kRGBD) {
    const auto bytes = targets::depth_to_bytes(fr.depth, render.near_plane, render.max_range);
    const auto d = targets::normalized_depth_plane(bytes);
    std::copy(d.begin(), d.end(), in.image.begin() + 3 * plane);
  }
  for (int i = 0; i < world::kVelocityDims; ++i) in.velocity[i] = static_cast<T>(obs.velocity[i]);
  for (int i = 0; i < world::kNumActions; ++i)
    in.prev_action[i] = static_cast<T>(obs.prev_action[i]);
  in.prev_reward = static_cast<T>(obs.prev_reward);
  return in;
}

template <typename T>
Network<T>::Network(ArchitectureSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  ParamVector<T> pv;
  register_all<T>(spec_, pv, slices_);
}

template <typename T>
ParamVector<T> Network<T>::make_params() const {
  ParamVector<T> pv;
  Slices unused;
  register_all<T>(spec_, pv, unused);
  return pv;
}

template <typename T>
ParamVector<T> Network<T>::init_params(std::mt19937_64& rng) const {
  ParamVector<T> pv = make_params();
  for (const auto& s : pv.registry()) {
    const bool is_bias = s.shape.rank == 1;
    if (is_bias) continue;
    auto w = pv.values(s);
    if (s.shape.rank == 4) {
      ad::init_fan_in_uniform<T>(w, s.shape[1] * s.shape[2] * s.shape[3], rng);
      continue;
    }
    const int rows = s.shape[0];
    const int cols = s.shape[1];
    const bool is_lstm = s.name.rfind("lstm", 0) == 0;
    if (!is_lstm) {
      ad::init_fan_in_uniform<T>(w, cols, rng);
      continue;
    }
    // Input columns fan-in uniform; each gate's recurrent n x n block
    // orthogonal.
    const int n = rows / 4;
    const int nx = cols - n;
    ad::init_fan_in_uniform<T>(w, cols, rng);
    for (int g = 0; g < 4; ++g)
      ad::init_orthogonal<T>(w.data() + static_cast<std::size_t>(g) * n * cols + nx, n, n, cols,
                             rng);
  }
  return pv;
}

template <typename T>
RecurrentState<T> Network<T>::zero_state() const {
  RecurrentState<T> s;
  if (spec_.variant == Variant::kNav2Lstm) {
    s.h1.assign(spec_.lstm1_width, T(0));
    s.c1.assign(spec_.lstm1_width, T(0));
  }
  if (spec_.recurrent()) {
    s.h2.assign(spec_.lstm2_width, T(0));
    s.c2.assign(spec_.lstm2_width, T(0));
  }
  return s;
}

template <typename T>
void Network<T>::check_state(const RecurrentState<T>& s) const {
  const std::size_t n1 = spec_.variant == Variant::kNav2Lstm ? spec_.lstm1_width : 0;
  const std::size_t n2 = spec_.recurrent() ? spec_.lstm2_width : 0;
  if (s.h1.size() != n1 || s.c1.size() != n1 || s.h2.size() != n2 || s.c2.size() != n2)
    throw UsageError("recurrent state widths (" + std::to_string(s.h1.size()) + ", " +
                     std::to_string(s.h2.size()) + ") do not match the network (" +
                     std::to_string(n1) + ", " + std::to_string(n2) + ")");
}

template <typename T>
typename Network<T>::Bound Network<T>::bind(Tape<T>& tape, ParamVector<T>& params) const {
  Bound b;
  auto p = [&](const ParamSlice& s) { return s.name.empty() ? Var{} : tape.parameter(params, s); };
  const Slices& s = slices_;
  b.conv1_w = p(s.conv1_w), b.conv1_b = p(s.conv1_b);
  b.conv2_w = p(s.conv2_w), b.conv2_b = p(s.conv2_b);
  b.fc_w = p(s.fc_w), b.fc_b = p(s.fc_b);
  b.lstm1_w = p(s.lstm1_w), b.lstm1_b = p(s.lstm1_b);
  b.lstm2_w = p(s.lstm2_w), b.lstm2_b = p(s.lstm2_b);
  b.policy_w = p(s.policy_w), b.policy_b = p(s.policy_b);
  b.value_w = p(s.value_w), b.value_b = p(s.value_b);
  b.d1_hw = p(s.d1_hw), b.d1_hb = p(s.d1_hb), b.d1_ow = p(s.d1_ow), b.d1_ob = p(s.d1_ob);
  b.d2_hw = p(s.d2_hw), b.d2_hb = p(s.d2_hb), b.d2_ow = p(s.d2_ow), b.d2_ob = p(s.d2_ob);
  b.loop_hw = p(s.loop_hw), b.loop_hb = p(s.loop_hb);
  b.loop_ow = p(s.loop_ow), b.loop_ob = p(s.loop_ob);
  b.rew_hw = p(s.rew_hw), b.rew_hb = p(s.rew_hb), b.rew_ow = p(s.rew_ow), b.rew_ob = p(s.rew_ob);
  return b;
}

template <typename T>
typename Network<T>::StateVars Network<T>::state_vars(Tape<T>& tape,
                                                      const RecurrentState<T>& s) const {
  check_state(s);
  StateVars v;
  if (!s.h1.empty()) {
    v.h1 = tape.constant(s.h1);
    v.c1 = tape.constant(s.c1);
  }
  if (!s.h2.empty()) {
    v.h2 = tape.constant(s.h2);
    v.c2 = tape.constant(s.c2);
  }
  return v;
}

template <typename T>
RecurrentState<T> Network<T>::read_state(const Tape<T>& tape, const StateVars& v) const {
  RecurrentState<T> s;
  auto get = [&](Var x, std::vector<T>& dst) {
    if (!x.valid()) return;
    auto val = tape.value(x);
    dst.assign(val.begin(), val.end());
  };
  get(v.h1, s.h1);
  get(v.c1, s.c1);
  get(v.h2, s.h2);
  get(v.c2, s.c2);
  return s;
}

template <typename T>
Var Network<T>::encode(Tape<T>& tape, const Bound& p, Var image) const {
  Var x = tape.relu(tape.conv2d(image, p.conv1_w, p.conv1_b, spec_.conv1.stride));
  x = tape.relu(tape.conv2d(x, p.conv2_w, p.conv2_b, spec_.conv2.stride));
  return tape.relu(tape.linear(x, p.fc_w, p.fc_b));
}

template <typename T>
typename Network<T>::Vars Network<T>::forward(Tape<T>& tape, const Bound& p, const NetInput<T>& in,
                                              const StateVars& state) const {
  const std::size_t expected = static_cast<std::size_t>(spec_.input_channels()) *
                               spec_.image_height * spec_.image_width;
  if (in.image.size() != expected)
    throw UsageError("input image has " + std::to_string(in.image.size()) + " values, expected " +
                     std::to_string(expected));
  const Var image =
      tape.constant(in.image, Shape{spec_.input_channels(), spec_.image_height, spec_.image_width});
  Vars v;
  v.features = encode(tape, p, image);

  Var top = v.features;
  switch (spec_.variant) {
    case Variant::kFF: break;
    case Variant::kLstm1: {
      if (!state.h2.valid()) throw UsageError("missing recurrent state");
      auto [h, c] = tape.lstm_cell(v.features, state.h2, state.c2, p.lstm2_w, p.lstm2_b);
      v.next.h2 = h;
      v.next.c2 = c;
      top = h;
      break;
    }
    case Variant::kNav2Lstm: {
      if (!state.h1.valid() || !state.h2.valid()) throw UsageError("missing recurrent state");
      const Var r = tape.constant(std::span<const T>(&in.prev_reward, 1));
      const Var x1 = tape.concat({v.features, r});
      auto [h1, c1] = tape.lstm_cell(x1, state.h1, state.c1, p.lstm1_w, p.lstm1_b);
      const Var vel = tape.constant(in.velocity);
      const Var act = tape.constant(in.prev_action);
      const Var x2 = tape.concat({h1, v.features, vel, act});
      auto [h2, c2] = tape.lstm_cell(x2, state.h2, state.c2, p.lstm2_w, p.lstm2_b);
      v.next = StateVars{h1, c1, h2, c2};
      top = h2;
      break;
    }
  }
  v.policy = tape.linear(top, p.policy_w, p.policy_b);
  v.value = tape.linear(top, p.value_w, p.value_b);

  auto mlp = [&](Var x, Var hw, Var hb, Var ow, Var ob) {
    return tape.linear(tape.relu(tape.linear(x, hw, hb)), ow, ob);
  };
  if (spec_.heads.d1) v.d1 = mlp(v.features, p.d1_hw, p.d1_hb, p.d1_ow, p.d1_ob);
  if (spec_.heads.d2) v.d2 = mlp(top, p.d2_hw, p.d2_hb, p.d2_ow, p.d2_ob);
  if (spec_.heads.loop) v.loop = mlp(top, p.loop_hw, p.loop_hb, p.loop_ow, p.loop_ob);
  return v;
}

template <typename T>
Var Network<T>::reward_logits(Tape<T>& tape, const Bound& p, std::span<const T> image) const {
  if (!spec_.heads.reward) throw UsageError("network has no reward head");
  const Var x =
      tape.constant(image, Shape{spec_.input_channels(), spec_.image_height, spec_.image_width});
  const Var f = encode(tape, p, x);
  return tape.linear(tape.relu(tape.linear(f, p.rew_hw, p.rew_hb)), p.rew_ow, p.rew_ob);
}

template <typename T>
ForwardOut<T> Network<T>::read_out(const Tape<T>& tape, const Vars& v) const {
  ForwardOut<T> out;
  auto pol = tape.value(v.policy);
  std::copy(pol.begin(), pol.end(), out.policy_logits.begin());
  out.value = tape.scalar(v.value);
  auto vec = [&](Var x) {
    auto s = tape.value(x);
    return std::vector<T>(s.begin(), s.end());
  };
  if (v.d1.valid()) out.d1 = vec(v.d1);
  if (v.d2.valid()) out.d2 = vec(v.d2);
  if (v.loop.valid()) out.loop_logit = tape.scalar(v.loop);
  return out;
}

template <typename T>
std::pair<ForwardOut<T>, RecurrentState<T>> Network<T>::step(ParamVector<T>& params,
                                                             const NetInput<T>& in,
                                                             const RecurrentState<T>& state) const {
  Tape<T> tape;
  const Bound b = bind(tape, params);
  const StateVars sv = state_vars(tape, state);
  const Vars v = forward(tape, b, in, sv);
  ForwardOut<T> out = read_out(tape, v);
  if (spec_.heads.reward) {
    const Var r = tape.linear(tape.relu(tape.linear(v.features, b.rew_hw, b.rew_hb)), b.rew_ow,
                              b.rew_ob);
    auto rv = tape.value(r);
    out.reward_logits = std::array<T, 3>{rv[0], rv[1], rv[2]};
  }
  return {std::move(out), read_state(tape, v.next)};
}

template <typename T>
int act(std::span<const T> logits, std::mt19937_64& rng) {
  if (logits.empty() || logits.size() > 64) throw UsageError("act: expected 1..64 logits");
  const T mx = *std::max_element(logits.begin(), logits.end());
  double total = 0;
  double p[64];
  const std::size_t n = logits.size();
  for (std::size_t i = 0; i < n; ++i) total += p[i] = std::exp(static_cast<double>(logits[i] - mx));
  const double u = std::generate_canonical<double, 53>(rng) * total;
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding at the top end: last action with non-zero mass.
  for (std::size_t i = n; i-- > 0;)
    if (p[i] > 0) return static_cast<int>(i);
  return 0;
}

template class Network<float>;
template class Network<double>;
template NetInput<float> encode_observation<float>(const world::Observation&,
                                                   const ArchitectureSpec&,
                                                   const world::RenderConfig&);
template NetInput<double> encode_observation<double>(const world::Observation&,
                                                     const ArchitectureSpec&,
                                                     const world::RenderConfig&);
template int act<float>(std::span<const float>, std::mt19937_64&);
template int act<double>(std::span<const double>, std::mt19937_64&);

}  // namespace nav::agent
