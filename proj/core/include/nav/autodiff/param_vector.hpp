// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "nav/autodiff/tensor.hpp"

namespace nav::ad {

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  Shape shape;

  std::size_t size() const { return shape.numel(); }
};

// A single flat parameter array with named, disjoint, contiguous slices.
// Every module of a network points into one of these.
template <typename T>
class ParamVector {
 public:
  ParamVector() = default;

  // Appends a zero-initialised slice. Names must be unique.
  ParamSlice add(const std::string& name, Shape shape) {
    if (index_.count(name)) throw ConfigError("duplicate parameter slice: " + name);
    ParamSlice s{name, flat_.size(), shape};
    flat_.resize(flat_.size() + s.size(), T(0));
    grad_.resize(flat_.size(), T(0));
    index_[name] = registry_.size();
    registry_.push_back(s);
    return s;
  }

  const ParamSlice& slice(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter slice: " + name);
    return registry_[it->second];
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::span<T> values(const ParamSlice& s) { return {flat_.data() + s.offset, s.size()}; }
  std::span<const T> values(const ParamSlice& s) const {
    return {flat_.data() + s.offset, s.size()};
  }
  std::span<T> grads(const ParamSlice& s) { return {grad_.data() + s.offset, s.size()}; }
  std::span<const T> grads(const ParamSlice& s) const {
    return {grad_.data() + s.offset, s.size()};
  }

  std::span<T> flat() { return flat_; }
  std::span<const T> flat() const { return flat_; }
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }
  std::size_t size() const { return flat_.size(); }

  const std::vector<ParamSlice>& registry() const { return registry_; }

  void zero_grad() { std::fill(grad_.begin(), grad_.end(), T(0)); }

  // Same registry, values converted element-wise.
  template <typename U>
  ParamVector<U> cast() const {
    ParamVector<U> out;
    for (const auto& s : registry_) out.add(s.name, s.shape);
    auto dst = out.flat();
    for (std::size_t i = 0; i < flat_.size(); ++i) dst[i] = static_cast<U>(flat_[i]);
    return out;
  }

  // True when the registered slices tile [0, size()) without gaps or overlap.
  bool is_partition() const {
    std::size_t next = 0;
    for (const auto& s : registry_) {
      if (s.offset != next) return false;
      next += s.size();
    }
    return next == flat_.size();
  }

 private:
  // Aligned so vectorised reductions round the same way in every run.
  std::vector<T, Eigen::aligned_allocator<T>> flat_;
  std::vector<T, Eigen::aligned_allocator<T>> grad_;
  std::vector<ParamSlice> registry_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Element-atomic accessors used by every path that touches shared training
// state. Relaxed ordering: the Hogwild contract only asks for per-element
// atomicity, cross-element interleavings are accepted races.
template <typename T>
inline T atomic_load(const T& v) {
  return std::atomic_ref<T>(const_cast<T&>(v)).load(std::memory_order_relaxed);
}
template <typename T>
inline void atomic_store(T& v, T x) {
  std::atomic_ref<T>(v).store(x, std::memory_order_relaxed);
}

// Copies shared parameters into a worker-local vector (A3C "sync").
template <typename T>
void snapshot_into(const ParamVector<T>& shared, ParamVector<T>& local) {
  auto src = shared.flat();
  auto dst = local.flat();
  if (src.size() != dst.size()) throw ConfigError("snapshot size mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = atomic_load(src[i]);
}

}  // namespace nav::ad
