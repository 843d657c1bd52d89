// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

#include "nav/train/hyperparams.hpp"

namespace nav::train {

// Ring buffer of (frame, reward class of the step taken from that frame).
class ReplayBuffer {
 public:
  struct Item {
    std::vector<float> frame;
    int cls = 0;
  };

  explicit ReplayBuffer(std::size_t capacity = 2000);

  void push(std::vector<float> frame, int cls);
  void clear();

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  std::size_t count(int cls) const { return by_class_.at(cls).size(); }
  const Item& item(std::size_t i) const { return items_.at(i); }

  // Each draw picks one of the populated classes uniformly, then a stored
  // item of that class uniformly. Returns item indices; empty when the buffer
  // is empty.
  std::vector<std::size_t> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Item> items_;
  std::array<std::vector<std::size_t>, kRewardClasses> by_class_;
};

}  // namespace nav::train
