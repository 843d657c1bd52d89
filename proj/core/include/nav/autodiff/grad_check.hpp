// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "nav/autodiff/param_vector.hpp"
#include "nav/autodiff/tape.hpp"

namespace nav::ad {

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
  // Parameters whose stencil crossed a relu kink at every step size tried.
  // They sit on a kink, where the derivative is one-sided, and are not scored.
  std::size_t on_kink = 0;
};

// Builds the loss for the current parameter values on a fresh tape.
using LossBuilder = std::function<Var(Tape<double>&, ParamVector<double>&)>;

// Compares backward() against the five-point central difference
//   (f(x-2e) - 8 f(x-e) + 8 f(x+e) - f(x+2e)) / 12e
// for every parameter. Relative error is |a - n| / max(|a|, |n|, floor); the
// floor keeps exactly-zero gradients (dead relu paths) from dividing by zero.
//
// The step runs down a ladder eps, eps/shrink, ... A stencil that flips any
// relu is discarded. Of the smooth ones, up to `smooth_steps` are taken and
// the estimate from the adjacent pair that agrees best is kept, which picks
// the step where truncation and roundoff balance.
inline GradCheckResult grad_check(ParamVector<double>& params, const LossBuilder& build,
                                  double eps = 1e-4, double floor = 1e-12, int steps = 5,
                                  double shrink = 8, int smooth_steps = 1) {
  Tape<double> tape;
  params.zero_grad();
  Var loss = build(tape, params);
  tape.backward(loss);
  std::vector<double> analytic(params.grad().begin(), params.grad().end());
  const std::vector<bool> pattern = tape.relu_pattern();

  GradCheckResult res;
  auto flat = params.flat();
  std::vector<double> found;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    bool smooth = true;
    auto eval_at = [&](double x) {
      flat[i] = x;
      tape.clear();
      const double f = tape.scalar(build(tape, params));
      smooth = smooth && tape.relu_pattern() == pattern;
      return f;
    };
    found.clear();
    double e = eps;
    for (int k = 0; k < steps && static_cast<int>(found.size()) < smooth_steps; ++k, e /= shrink) {
      smooth = true;
      const double f2 = eval_at(saved + 2 * e), f1 = eval_at(saved + e);
      const double b1 = eval_at(saved - e), b2 = eval_at(saved - 2 * e);
      if (smooth) found.push_back((8 * (f1 - b1) - (f2 - b2)) / (12 * e));
    }
    flat[i] = saved;
    if (found.empty()) {
      ++res.on_kink;
      continue;
    }
    double numeric = found[0];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < found.size(); ++k) {
      const double gap = std::abs(found[k] - found[k - 1]);
      if (gap < best) best = gap, numeric = found[k];
    }
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_index = i;
      res.analytic = analytic[i];
      res.numeric = numeric;
    }
  }
  params.zero_grad();
  return res;
}

}  // namespace nav::ad
