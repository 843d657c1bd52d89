// SPDX-License-Identifier: Apache-2.0
#include "nav/train/replay_buffer.hpp"

#include <algorithm>
#include <string>

#include "nav/errors.hpp"

namespace nav::train {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
  items_.reserve(capacity);
}

void ReplayBuffer::push(std::vector<float> frame, int cls) {
  if (cls < 0 || cls >= kRewardClasses) throw DataError("reward class " + std::to_string(cls));
  std::size_t slot;
  if (items_.size() < capacity_) {
    slot = items_.size();
    items_.push_back({std::move(frame), cls});
  } else {
    slot = next_;
    auto& old = by_class_[items_[slot].cls];
    auto it = std::find(old.begin(), old.end(), slot);
    *it = old.back();
    old.pop_back();
    items_[slot] = {std::move(frame), cls};
  }
  by_class_[cls].push_back(slot);
  next_ = (slot + 1) % capacity_;
}

void ReplayBuffer::clear() {
  items_.clear();
  next_ = 0;
  for (auto& v : by_class_) v.clear();
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  std::vector<std::size_t> out;
  if (items_.empty()) return out;
  std::array<int, kRewardClasses> populated{};
  int k = 0;
  for (int c = 0; c < kRewardClasses; ++c)
    if (!by_class_[c].empty()) populated[k++] = c;
  out.reserve(n);
  std::uniform_int_distribution<int> pick_class(0, k - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pool = by_class_[populated[pick_class(rng)]];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    out.push_back(pool[pick(rng)]);
  }
  return out;
}

}  // namespace nav::train
