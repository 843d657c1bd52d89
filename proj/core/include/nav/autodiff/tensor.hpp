// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "nav/errors.hpp"

namespace nav::ad {

// Up to rank-4 dense shape. Row-major everywhere.
struct Shape {
  std::array<int, 4> dims{};
  int rank = 0;

  Shape() = default;
  Shape(std::initializer_list<int> d) {
    if (d.size() > dims.size()) throw ConfigError("shape rank > 4");
    for (int v : d) {
      if (v <= 0) throw ConfigError("shape dims must be positive");
      dims[rank++] = v;
    }
  }

  std::size_t numel() const {
    std::size_t n = 1;
    for (int i = 0; i < rank; ++i) n *= static_cast<std::size_t>(dims[i]);
    return n;
  }
  int operator[](int i) const { return dims[i]; }
  int last() const { return rank == 0 ? 1 : dims[rank - 1]; }

  bool operator==(const Shape& o) const {
    if (rank != o.rank) return false;
    for (int i = 0; i < rank; ++i)
      if (dims[i] != o.dims[i]) return false;
    return true;
  }

  std::string str() const {
    std::string s = "[";
    for (int i = 0; i < rank; ++i) {
      if (i) s += "x";
      s += std::to_string(dims[i]);
    }
    return s + "]";
  }
};

// Owned dense tensor; grad is empty until requested.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), data(s.numel(), T(0)) {}
  Tensor(Shape s, std::vector<T> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.numel())
      throw ConfigError("tensor data length " + std::to_string(data.size()) +
                        " does not match shape " + shape.str());
  }

  std::size_t size() const { return data.size(); }
  void enable_grad() { grad.assign(data.size(), T(0)); }
};

}  // namespace nav::ad
