// SPDX-License-Identifier: Apache-2.0
#include "nav/targets/loop_closure.hpp"

#include <cmath>

#include "nav/errors.hpp"

namespace nav::targets {

namespace {

double dist(const Position& a, const Position& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

// Walks backwards from t-1. `far_between` tracks whether any point in
// (t', t) is at least eta2 away, so each candidate t' is checked in O(1).
int label_at(std::span<const Position> traj, std::size_t t, const LoopThresholds& thr) {
  bool far_between = false;
  for (std::size_t k = t; k-- > 0;) {
    const double d = dist(traj[t], traj[k]);
    if (far_between && d <= thr.eta1) return 1;
    if (d >= thr.eta2) far_between = true;
  }
  return 0;
}

}  // namespace

void LoopThresholds::validate() const {
  if (!(eta1 > 0 && eta2 > eta1)) throw ConfigError("loop thresholds need eta2 > eta1 > 0");
}

std::vector<int> loop_closure_labels(std::span<const Position> trajectory,
                                     const LoopThresholds& thr) {
  thr.validate();
  std::vector<int> labels(trajectory.size(), 0);
  for (std::size_t t = 1; t < trajectory.size(); ++t) labels[t] = label_at(trajectory, t, thr);
  return labels;
}

LoopLabeler::LoopLabeler(LoopThresholds thr) : thr_(thr) { thr_.validate(); }

int LoopLabeler::push(const Position& p) {
  history_.push_back(p);
  return label_at(history_, history_.size() - 1, thr_);
}

}  // namespace nav::targets
