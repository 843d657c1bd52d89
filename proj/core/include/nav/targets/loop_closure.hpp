// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <vector>

namespace nav::targets {

struct LoopThresholds {
  double eta1 = 1.0;  // "close" radius, maze units
  double eta2 = 2.0;  // excursion distance that makes a revisit non-trivial

  void validate() const;
};

using Position = std::array<double, 2>;

// l_t = 1 iff some earlier t' has |p_t - p_t'| <= eta1 and some t'' strictly
// between t' and t has |p_t - p_t''| >= eta2. l_0 = 0.
std::vector<int> loop_closure_labels(std::span<const Position> trajectory,
                                     const LoopThresholds& thr = {});

// Incremental form: label for the newest point, given all earlier ones.
// O(t) per call; labels never depend on future positions.
class LoopLabeler {
 public:
  explicit LoopLabeler(LoopThresholds thr = {});

  int push(const Position& p);
  void reset() { history_.clear(); }
  const std::vector<Position>& history() const { return history_; }

 private:
  LoopThresholds thr_;
  std::vector<Position> history_;
};

}  // namespace nav::targets
