// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <new>
#include <span>
#include <utility>
#include <vector>

#include "nav/autodiff/param_vector.hpp"
#include "nav/autodiff/tensor.hpp"

namespace nav::ad {

// Handle to a value recorded on a Tape. Only meaningful for the tape that
// produced it and only until that tape is cleared.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

enum class Op : std::uint8_t {
  kLinear,
  kConv2d,
  kLstmCell,
  kRelu,
  kSigmoid,
  kTanh,
  kSoftmax,
  kLogSoftmax,
  kConcat,
  kCategoricalNll,
  kBernoulliNll,
  kMse,
  kPolicyEntropy,
  kWeightedSum,
};

// Bump allocator backing tape storage. reset() keeps the blocks.
template <typename T>
class Arena {
 public:
  T* alloc(std::size_t n);
  void reset();

 private:
  static constexpr std::size_t kBlock = std::size_t{1} << 18;
  // Every allocation starts on a cache line, so results never depend on
  // where the heap put a block.
  static constexpr std::size_t kAlign = 64;
  static constexpr std::size_t kLane = kAlign / sizeof(T);
  struct AlignedDelete {
    void operator()(T* p) const { ::operator delete[](p, std::align_val_t{kAlign}); }
  };
  std::vector<std::unique_ptr<T[], AlignedDelete>> blocks_;
  std::vector<std::size_t> capacity_;
  std::size_t current_ = 0;
  std::size_t used_ = 0;
};

// Reverse-mode tape. Every op call appends exactly one record; backward()
// replays the records in reverse order. Parameters are bound by pointer into
// a ParamVector, so gradients accumulate straight into its grad buffer.
//
// Single-owner: a tape is never shared between threads.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves. Constants never receive gradients.
  Var constant(std::span<const T> data, Shape shape);
  Var constant(std::span<const T> data) {
    return constant(data, Shape{static_cast<int>(data.size())});
  }
  Var parameter(ParamVector<T>& params, const ParamSlice& slice);

  // y = W x + b with W [n_out, n_in]; x may have any shape with n_in elements.
  Var linear(Var x, Var w, Var b);
  // Valid (unpadded) convolution. x [C,H,W], kernels [C',C,k,k], bias [C'].
  Var conv2d(Var x, Var kernels, Var bias, int stride);
  // Forget-gate LSTM without peepholes. w [4n, n_x + n], b [4n], gate
  // row-blocks ordered (input, forget, output, candidate). Returns (h', c').
  std::pair<Var, Var> lstm_cell(Var x, Var h, Var c, Var w, Var b);

  Var relu(Var x);
  Var sigmoid(Var x);
  Var tanh(Var x);
  // Over the last axis.
  Var softmax(Var x);
  Var log_softmax(Var x);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) {
    return concat(std::span<const Var>(parts.begin(), parts.size()));
  }

  // Losses. All return a scalar node.
  // logits hold rows x K values where rows = classes.size(); mean over rows.
  Var categorical_nll(Var logits, std::span<const int> classes);
  Var categorical_nll(Var logits, int cls) {
    return categorical_nll(logits, std::span<const int>(&cls, 1));
  }
  Var bernoulli_nll(Var logit, T label);
  // mean((pred - target)^2)
  Var mse(Var pred, std::span<const T> target);
  // Sum over rows of -sum p log p, rows of width `classes`.
  Var policy_entropy(Var logits, int classes);
  Var policy_entropy(Var logits) { return policy_entropy(logits, shape(logits).last()); }
  // sum_i w_i * x_i over same-shape inputs.
  Var weighted_sum(std::span<const Var> terms, std::span<const T> weights);
  Var scale(Var x, T w) { return weighted_sum(std::span<const Var>(&x, 1), std::span<const T>(&w, 1)); }
  Var add(Var a, Var b) {
    const Var t[2] = {a, b};
    const T w[2] = {T(1), T(1)};
    return weighted_sum(t, w);
  }

  // Sets d(loss)/d(loss) = 1 and propagates. Intermediate grads are reset on
  // entry; parameter grads accumulate across calls.
  void backward(Var loss);

  std::span<const T> value(Var v) const { return {node(v).value, node(v).size}; }
  std::span<const T> grad(Var v) const;
  const Shape& shape(Var v) const { return node(v).shape; }
  T scalar(Var v) const { return node(v).value[0]; }

  std::size_t num_records() const { return records_.size(); }
  std::size_t num_nodes() const { return nodes_.size(); }
  // Ops in execution order, and the record indices visited by the last
  // backward() call.
  std::vector<Op> op_log() const;
  const std::vector<std::int32_t>& last_backward_trace() const { return trace_; }
  // On/off state of every relu unit, in execution order. The recorded
  // function is smooth in any region where this stays fixed.
  std::vector<bool> relu_pattern() const;

  void clear();

 private:
  struct Node {
    Shape shape;
    T* value = nullptr;
    T* grad = nullptr;  // null when no gradient flows
    std::size_t size = 0;
    bool is_param = false;
  };

  struct Record {
    Op op;
    std::int32_t out = -1;
    std::int32_t out2 = -1;
    std::int32_t in[5] = {-1, -1, -1, -1, -1};
    std::int32_t iparam = 0;  // stride, rows, list length...
    std::size_t ilist = 0;    // offset into int_store_
    T* saved = nullptr;       // op-specific scratch
    T scalar = T(0);
  };

  const Node& node(Var v) const;
  Var make_node(Shape shape, bool needs_grad);
  void check(Var v) const;
  bool needs_grad(Var v) const { return node(v).grad != nullptr; }
  void push(const Record& r);

  void backward_record(const Record& r);

  std::vector<Node> nodes_;
  std::vector<Record> records_;
  std::vector<std::int32_t> trace_;
  std::vector<int> int_store_;
  Arena<T> values_;
  Arena<T> grads_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace nav::ad
