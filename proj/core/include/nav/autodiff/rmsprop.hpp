// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "nav/autodiff/param_vector.hpp"

namespace nav::ad {

// Plain RMSProp accumulator: no momentum, no centering.
template <typename T>
struct RmsPropState {
  std::vector<T> ms;
  T decay = T(0.99);
  T epsilon = T(0.1);

  RmsPropState() = default;
  explicit RmsPropState(std::size_t n, T decay_ = T(0.99), T epsilon_ = T(0.1))
      : ms(n, T(0)), decay(decay_), epsilon(epsilon_) {}
};

// ms <- decay*ms + (1-decay)*g^2 ; param <- param - lr*g/sqrt(ms+eps).
// Every element of params and ms is read and written through relaxed atomics,
// so several workers may apply into the same buffers concurrently.
template <typename T>
void rmsprop_apply(std::span<T> params, std::span<const T> grads, RmsPropState<T>& state, T lr) {
  if (params.size() != grads.size() || params.size() != state.ms.size())
    throw ConfigError("rmsprop_apply: length mismatch");
  const T decay = state.decay;
  const T eps = state.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    const T ms = decay * atomic_load(state.ms[i]) + (T(1) - decay) * g * g;
    atomic_store(state.ms[i], ms);
    if (g != T(0) && lr != T(0)) atomic_store(params[i], atomic_load(params[i]) - lr * g / std::sqrt(ms + eps));
  }
}

template <typename T>
T global_norm(std::span<const T> grads) {
  double acc = 0;
  for (T g : grads) acc += static_cast<double>(g) * static_cast<double>(g);
  return static_cast<T>(std::sqrt(acc));
}

// Rescales grads so their L2 norm is at most max_norm. Returns the norm
// before clipping. max_norm <= 0 disables clipping.
template <typename T>
T clip_by_global_norm(std::span<T> grads, T max_norm) {
  const T norm = global_norm<T>(grads);
  if (max_norm > T(0) && norm > max_norm) {
    const T s = max_norm / norm;
    for (T& g : grads) g *= s;
  }
  return norm;
}

}  // namespace nav::ad
