// SPDX-License-Identifier: Apache-2.0
#include "nav/autodiff/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

namespace nav::ad {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Vec<T>>;
template <typename T>
using CVecMap = Eigen::Map<const Vec<T>>;

template <typename T>
T sigmoid_scalar(T z) {
  if (z >= 0) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

// log(1 + exp(z)) without overflow.
template <typename T>
T softplus(T z) {
  return std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
}

template <typename T>
void softmax_row(const T* x, T* y, int k) {
  T m = x[0];
  for (int j = 1; j < k; ++j) m = std::max(m, x[j]);
  T sum = 0;
  for (int j = 0; j < k; ++j) {
    y[j] = std::exp(x[j] - m);
    sum += y[j];
  }
  for (int j = 0; j < k; ++j) y[j] /= sum;
}

template <typename T>
void log_softmax_row(const T* x, T* y, int k) {
  T m = x[0];
  for (int j = 1; j < k; ++j) m = std::max(m, x[j]);
  T sum = 0;
  for (int j = 0; j < k; ++j) sum += std::exp(x[j] - m);
  const T lse = m + std::log(sum);
  for (int j = 0; j < k; ++j) y[j] = x[j] - lse;
}

// cols [C*k*k, Ho*Wo]
template <typename T>
void im2col(const T* x, int c, int h, int w, int k, int stride, int ho, int wo, T* cols) {
  const int n = ho * wo;
  for (int ci = 0; ci < c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + static_cast<std::size_t>((ci * k + ky) * k + kx) * n;
        for (int oy = 0; oy < ho; ++oy) {
          const T* src = x + (static_cast<std::size_t>(ci) * h + oy * stride + ky) * w + kx;
          for (int ox = 0; ox < wo; ++ox) row[oy * wo + ox] = src[ox * stride];
        }
      }
}

template <typename T>
void col2im_add(const T* cols, int c, int h, int w, int k, int stride, int ho, int wo, T* gx) {
  const int n = ho * wo;
  for (int ci = 0; ci < c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + static_cast<std::size_t>((ci * k + ky) * k + kx) * n;
        for (int oy = 0; oy < ho; ++oy) {
          T* dst = gx + (static_cast<std::size_t>(ci) * h + oy * stride + ky) * w + kx;
          for (int ox = 0; ox < wo; ++ox) dst[ox * stride] += row[oy * wo + ox];
        }
      }
}

}  // namespace

// ---------------------------------------------------------------- Arena

template <typename T>
T* Arena<T>::alloc(std::size_t n) {
  const std::size_t padded = (n + kLane - 1) / kLane * kLane;
  while (true) {
    if (current_ < blocks_.size()) {
      if (used_ + padded <= capacity_[current_]) {
        T* p = blocks_[current_].get() + used_;
        used_ += padded;
        std::fill(p, p + n, T(0));
        return p;
      }
      ++current_;
      used_ = 0;
      continue;
    }
    const std::size_t cap = std::max(kBlock, padded);
    blocks_.emplace_back(static_cast<T*>(::operator new[](cap * sizeof(T), std::align_val_t{kAlign})));
    capacity_.push_back(cap);
  }
}

template <typename T>
void Arena<T>::reset() {
  current_ = 0;
  used_ = 0;
}

// ---------------------------------------------------------------- Tape

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
void Tape<T>::check(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw UsageError("variable does not belong to this tape");
}

template <typename T>
Var Tape<T>::make_node(Shape shape, bool with_grad) {
  Node n;
  n.shape = shape;
  n.size = shape.numel();
  n.value = values_.alloc(n.size);
  n.grad = with_grad ? grads_.alloc(n.size) : nullptr;
  nodes_.push_back(n);
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

template <typename T>
void Tape<T>::push(const Record& r) {
  records_.push_back(r);
}

template <typename T>
std::span<const T> Tape<T>::grad(Var v) const {
  const Node n = node(v);
  if (!n.grad) return {};
  return {n.grad, n.size};
}

template <typename T>
std::vector<Op> Tape<T>::op_log() const {
  std::vector<Op> ops;
  ops.reserve(records_.size());
  for (const auto& r : records_) ops.push_back(r.op);
  return ops;
}

template <typename T>
void Tape<T>::clear() {
  nodes_.clear();
  records_.clear();
  int_store_.clear();
  trace_.clear();
  values_.reset();
  grads_.reset();
}

template <typename T>
Var Tape<T>::constant(std::span<const T> data, Shape shape) {
  if (data.size() != shape.numel())
    throw ConfigError("constant of " + std::to_string(data.size()) + " values for shape " +
                      shape.str());
  Var v = make_node(shape, false);
  std::copy(data.begin(), data.end(), nodes_[v.id].value);
  return v;
}

template <typename T>
Var Tape<T>::parameter(ParamVector<T>& params, const ParamSlice& slice) {
  if (slice.offset + slice.size() > params.size())
    throw ConfigError("parameter slice " + slice.name + " out of range");
  Node n;
  n.shape = slice.shape;
  n.size = slice.size();
  n.value = params.flat().data() + slice.offset;
  n.grad = params.grad().data() + slice.offset;
  n.is_param = true;
  nodes_.push_back(n);
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::linear(Var x, Var w, Var b) {
  const Node wn = node(w);
  const Node xn = node(x);
  const Node bn = node(b);
  if (wn.shape.rank != 2) throw ConfigError("linear weight must be rank 2, got " + wn.shape.str());
  const int n_out = wn.shape[0];
  const int n_in = wn.shape[1];
  if (static_cast<int>(xn.size) != n_in)
    throw ConfigError("linear input has " + std::to_string(xn.size) + " values, weight expects " +
                      std::to_string(n_in));
  if (static_cast<int>(bn.size) != n_out)
    throw ConfigError("linear bias has " + std::to_string(bn.size) + " values, expected " +
                      std::to_string(n_out));
  const bool g = xn.grad || wn.grad || bn.grad;
  Var y = make_node(Shape{n_out}, g);
  const Node& yn = nodes_[y.id];
  VecMap<T>(yn.value, n_out).noalias() =
      CMatMap<T>(nodes_[w.id].value, n_out, n_in) * CVecMap<T>(nodes_[x.id].value, n_in) +
      CVecMap<T>(nodes_[b.id].value, n_out);
  Record r{Op::kLinear};
  r.out = y.id;
  r.in[0] = x.id;
  r.in[1] = w.id;
  r.in[2] = b.id;
  push(r);
  return y;
}

template <typename T>
Var Tape<T>::conv2d(Var x, Var kernels, Var bias, int stride) {
  const Node xn = node(x);
  const Node kn = node(kernels);
  const Node bn = node(bias);
  if (xn.shape.rank != 3) throw ConfigError("conv2d input must be [C,H,W], got " + xn.shape.str());
  if (kn.shape.rank != 4 || kn.shape[2] != kn.shape[3])
    throw ConfigError("conv2d kernels must be [C',C,k,k], got " + kn.shape.str());
  if (stride <= 0) throw ConfigError("conv2d stride must be positive");
  const int c = xn.shape[0], h = xn.shape[1], w = xn.shape[2];
  const int co = kn.shape[0], k = kn.shape[2];
  if (kn.shape[1] != c)
    throw ConfigError("conv2d kernel expects " + std::to_string(kn.shape[1]) +
                      " input channels, got " + std::to_string(c));
  if (k > h || k > w)
    throw ConfigError("conv2d kernel " + std::to_string(k) + " larger than input " +
                      xn.shape.str());
  if (static_cast<int>(bn.size) != co) throw ConfigError("conv2d bias size mismatch");
  const int ho = (h - k) / stride + 1;
  const int wo = (w - k) / stride + 1;
  const int ckk = c * k * k;
  const int n = ho * wo;

  T* cols = values_.alloc(static_cast<std::size_t>(ckk) * n);
  im2col(xn.value, c, h, w, k, stride, ho, wo, cols);

  const bool g = xn.grad || kn.grad || bn.grad;
  Var y = make_node(Shape{co, ho, wo}, g);
  MatMap<T> out(nodes_[y.id].value, co, n);
  out.noalias() = CMatMap<T>(nodes_[kernels.id].value, co, ckk) * CMatMap<T>(cols, ckk, n);
  out.colwise() += CVecMap<T>(nodes_[bias.id].value, co);

  Record r{Op::kConv2d};
  r.out = y.id;
  r.in[0] = x.id;
  r.in[1] = kernels.id;
  r.in[2] = bias.id;
  r.iparam = stride;
  r.saved = cols;
  push(r);
  return y;
}

template <typename T>
std::pair<Var, Var> Tape<T>::lstm_cell(Var x, Var h, Var c, Var w, Var b) {
  const Node xn = node(x);
  const Node hn = node(h);
  const Node cn = node(c);
  const Node wn = node(w);
  const Node bn = node(b);
  const int n = static_cast<int>(hn.size);
  const int nx = static_cast<int>(xn.size);
  if (static_cast<int>(cn.size) != n)
    throw ConfigError("lstm_cell: h has width " + std::to_string(n) + " but c has " +
                      std::to_string(cn.size));
  if (wn.shape.rank != 2 || wn.shape[0] != 4 * n || wn.shape[1] != nx + n)
    throw ConfigError("lstm_cell: weight " + wn.shape.str() + " does not match [4*" +
                      std::to_string(n) + ", " + std::to_string(nx) + "+" + std::to_string(n) +
                      "]");
  if (static_cast<int>(bn.size) != 4 * n) throw ConfigError("lstm_cell: bias size mismatch");

  // saved: [x;h] (nx+n) | activated gates (4n) | tanh(c') (n)
  T* saved = values_.alloc(static_cast<std::size_t>(nx + n + 4 * n + n));
  T* xh = saved;
  T* gates = saved + nx + n;
  T* tc = gates + 4 * n;
  std::copy(xn.value, xn.value + nx, xh);
  std::copy(hn.value, hn.value + n, xh + nx);
  VecMap<T>(gates, 4 * n).noalias() =
      CMatMap<T>(wn.value, 4 * n, nx + n) * CVecMap<T>(xh, nx + n) + CVecMap<T>(bn.value, 4 * n);
  for (int j = 0; j < 3 * n; ++j) gates[j] = sigmoid_scalar(gates[j]);
  for (int j = 3 * n; j < 4 * n; ++j) gates[j] = std::tanh(gates[j]);

  const bool g = xn.grad || hn.grad || cn.grad || wn.grad || bn.grad;
  Var h2 = make_node(Shape{n}, g);
  Var c2 = make_node(Shape{n}, g);
  T* hv = nodes_[h2.id].value;
  T* cv = nodes_[c2.id].value;
  const T* cprev = nodes_[c.id].value;
  for (int j = 0; j < n; ++j) {
    const T ig = gates[j], fg = gates[n + j], og = gates[2 * n + j], cand = gates[3 * n + j];
    cv[j] = fg * cprev[j] + ig * cand;
    tc[j] = std::tanh(cv[j]);
    hv[j] = og * tc[j];
  }

  Record r{Op::kLstmCell};
  r.out = h2.id;
  r.out2 = c2.id;
  r.in[0] = x.id;
  r.in[1] = h.id;
  r.in[2] = c.id;
  r.in[3] = w.id;
  r.in[4] = b.id;
  r.saved = saved;
  push(r);
  return {h2, c2};
}

template <typename T>
Var Tape<T>::relu(Var x) {
  const Node xn = node(x);
  Var y = make_node(xn.shape, xn.grad != nullptr);
  const T* xv = nodes_[x.id].value;
  T* yv = nodes_[y.id].value;
  for (std::size_t i = 0; i < xn.size; ++i) yv[i] = xv[i] > T(0) ? xv[i] : T(0);
  Record r{Op::kRelu};
  r.out = y.id;
  r.in[0] = x.id;
  push(r);
  return y;
}

template <typename T>
Var Tape<T>::sigmoid(Var x) {
  const Node xn = node(x);
  Var y = make_node(xn.shape, xn.grad != nullptr);
  const T* xv = nodes_[x.id].value;
  T* yv = nodes_[y.id].value;
  for (std::size_t i = 0; i < xn.size; ++i) yv[i] = sigmoid_scalar(xv[i]);
  Record r{Op::kSigmoid};
  r.out = y.id;
  r.in[0] = x.id;
  push(r);
  return y;
}

template <typename T>
Var Tape<T>::tanh(Var x) {
  const Node xn = node(x);
  Var y = make_node(xn.shape, xn.grad != nullptr);
  const T* xv = nodes_[x.id].value;
  T* yv = nodes_[y.id].value;
  for (std::size_t i = 0; i < xn.size; ++i) yv[i] = std::tanh(xv[i]);
  Record r{Op::kTanh};
  r.out = y.id;
  r.in[0] = x.id;
  push(r);
  return y;
}

template <typename T>
Var Tape<T>::softmax(Var x) {
  const Node xn = node(x);
  const int k = xn.shape.last();
  const int rows = static_cast<int>(xn.size) / k;
  Var y = make_node(xn.shape, xn.grad != nullptr);
  for (int r = 0; r < rows; ++r)
    softmax_row(nodes_[x.id].value + r * k, nodes_[y.id].value + r * k, k);
  Record rec{Op::kSoftmax};
  rec.out = y.id;
  rec.in[0] = x.id;
  rec.iparam = k;
  push(rec);
  return y;
}

template <typename T>
Var Tape<T>::log_softmax(Var x) {
  const Node xn = node(x);
  const int k = xn.shape.last();
  const int rows = static_cast<int>(xn.size) / k;
  Var y = make_node(xn.shape, xn.grad != nullptr);
  for (int r = 0; r < rows; ++r)
    log_softmax_row(nodes_[x.id].value + r * k, nodes_[y.id].value + r * k, k);
  Record rec{Op::kLogSoftmax};
  rec.out = y.id;
  rec.in[0] = x.id;
  rec.iparam = k;
  push(rec);
  return y;
}

template <typename T>
Var Tape<T>::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("concat of zero inputs");
  std::size_t total = 0;
  bool g = false;
  for (Var p : parts) {
    total += node(p).size;
    g = g || needs_grad(p);
  }
  Var y = make_node(Shape{static_cast<int>(total)}, g);
  T* dst = nodes_[y.id].value;
  Record r{Op::kConcat};
  r.out = y.id;
  r.iparam = static_cast<std::int32_t>(parts.size());
  r.ilist = int_store_.size();
  for (Var p : parts) {
    const Node& pn = nodes_[p.id];
    dst = std::copy(pn.value, pn.value + pn.size, dst);
    int_store_.push_back(p.id);
  }
  push(r);
  return y;
}

template <typename T>
Var Tape<T>::categorical_nll(Var logits, std::span<const int> classes) {
  const Node ln = node(logits);
  if (classes.empty()) throw ConfigError("categorical_nll needs at least one row");
  const int rows = static_cast<int>(classes.size());
  if (ln.size % classes.size() != 0)
    throw ConfigError("categorical_nll: " + std::to_string(ln.size) +
                      " logits do not split into " + std::to_string(rows) + " rows");
  const int k = static_cast<int>(ln.size) / rows;
  for (int c : classes)
    if (c < 0 || c >= k)
      throw DataError("class index " + std::to_string(c) + " out of range [0," +
                      std::to_string(k) + ")");
  T* probs = values_.alloc(ln.size);
  Var y = make_node(Shape{1}, ln.grad != nullptr);
  T loss = 0;
  const T* lv = nodes_[logits.id].value;
  for (int r = 0; r < rows; ++r) {
    T* p = probs + r * k;
    log_softmax_row(lv + r * k, p, k);
    loss -= p[classes[r]];
    for (int j = 0; j < k; ++j) p[j] = std::exp(p[j]);
  }
  nodes_[y.id].value[0] = loss / T(rows);
  Record rec{Op::kCategoricalNll};
  rec.out = y.id;
  rec.in[0] = logits.id;
  rec.iparam = rows;
  rec.ilist = int_store_.size();
  int_store_.insert(int_store_.end(), classes.begin(), classes.end());
  rec.saved = probs;
  push(rec);
  return y;
}

template <typename T>
Var Tape<T>::bernoulli_nll(Var logit, T label) {
  const Node ln = node(logit);
  if (ln.size != 1) throw ConfigError("bernoulli_nll expects a single logit");
  if (!(label == T(0) || label == T(1))) throw DataError("bernoulli label must be 0 or 1");
  Var y = make_node(Shape{1}, ln.grad != nullptr);
  const T z = nodes_[logit.id].value[0];
  nodes_[y.id].value[0] = softplus(z) - label * z;
  Record rec{Op::kBernoulliNll};
  rec.out = y.id;
  rec.in[0] = logit.id;
  rec.scalar = label;
  push(rec);
  return y;
}

template <typename T>
Var Tape<T>::mse(Var pred, std::span<const T> target) {
  const Node pn = node(pred);
  if (target.size() != pn.size)
    throw ConfigError("mse: prediction has " + std::to_string(pn.size) + " values, target " +
                      std::to_string(target.size()));
  T* diff = values_.alloc(pn.size);
  Var y = make_node(Shape{1}, pn.grad != nullptr);
  T acc = 0;
  const T* pv = nodes_[pred.id].value;
  for (std::size_t i = 0; i < pn.size; ++i) {
    diff[i] = pv[i] - target[i];
    acc += diff[i] * diff[i];
  }
  nodes_[y.id].value[0] = acc / static_cast<T>(pn.size);
  Record rec{Op::kMse};
  rec.out = y.id;
  rec.in[0] = pred.id;
  rec.saved = diff;
  push(rec);
  return y;
}

template <typename T>
Var Tape<T>::policy_entropy(Var logits, int classes) {
  const Node ln = node(logits);
  if (classes <= 0 || ln.size % static_cast<std::size_t>(classes) != 0)
    throw ConfigError("policy_entropy: bad class count");
  const int rows = static_cast<int>(ln.size) / classes;
  // saved: probs | log-probs
  T* saved = values_.alloc(2 * ln.size);
  Var y = make_node(Shape{1}, ln.grad != nullptr);
  T h = 0;
  const T* lv = nodes_[logits.id].value;
  for (int r = 0; r < rows; ++r) {
    T* p = saved + r * classes;
    T* lp = saved + ln.size + r * classes;
    softmax_row(lv + r * classes, p, classes);
    log_softmax_row(lv + r * classes, lp, classes);
    for (int j = 0; j < classes; ++j) h -= p[j] * lp[j];
  }
  nodes_[y.id].value[0] = h;
  Record rec{Op::kPolicyEntropy};
  rec.out = y.id;
  rec.in[0] = logits.id;
  rec.iparam = classes;
  rec.saved = saved;
  push(rec);
  return y;
}

template <typename T>
Var Tape<T>::weighted_sum(std::span<const Var> terms, std::span<const T> weights) {
  if (terms.empty() || terms.size() != weights.size())
    throw ConfigError("weighted_sum needs matching, non-empty terms and weights");
  const Shape s = node(terms[0]).shape;
  bool g = false;
  for (Var t : terms) {
    if (!(node(t).shape == s))
      throw ConfigError("weighted_sum shape mismatch: " + s.str() + " vs " + node(t).shape.str());
    g = g || needs_grad(t);
  }
  Var y = make_node(s, g);
  T* w = values_.alloc(weights.size());
  std::copy(weights.begin(), weights.end(), w);
  T* yv = nodes_[y.id].value;
  const std::size_t n = s.numel();
  Record rec{Op::kWeightedSum};
  rec.out = y.id;
  rec.iparam = static_cast<std::int32_t>(terms.size());
  rec.ilist = int_store_.size();
  rec.saved = w;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const T* tv = nodes_[terms[i].id].value;
    for (std::size_t j = 0; j < n; ++j) yv[j] += w[i] * tv[j];
    int_store_.push_back(terms[i].id);
  }
  push(rec);
  return y;
}

// ---------------------------------------------------------------- reverse

template <typename T>
void Tape<T>::backward(Var loss) {
  trace_.clear();
  if (records_.empty()) return;
  const Node ln = node(loss);
  if (ln.size != 1) throw UsageError("backward needs a scalar loss, got " + ln.shape.str());
  if (!ln.grad) return;  // nothing upstream requires a gradient
  for (Node& n : nodes_)
    if (n.grad && !n.is_param) std::fill(n.grad, n.grad + n.size, T(0));
  nodes_[loss.id].grad[0] = T(1);
  for (std::size_t i = records_.size(); i-- > 0;) {
    const Record& r = records_[i];
    if (!nodes_[r.out].grad) continue;
    trace_.push_back(static_cast<std::int32_t>(i));
    backward_record(r);
  }
}

template <typename T>
void Tape<T>::backward_record(const Record& r) {
  Node& out = nodes_[r.out];
  const T* gy = out.grad;
  switch (r.op) {
    case Op::kLinear: {
      Node& x = nodes_[r.in[0]];
      Node& w = nodes_[r.in[1]];
      Node& b = nodes_[r.in[2]];
      const int n_out = w.shape[0], n_in = w.shape[1];
      CVecMap<T> g(gy, n_out);
      if (x.grad)
        VecMap<T>(x.grad, n_in).noalias() += CMatMap<T>(w.value, n_out, n_in).transpose() * g;
      if (w.grad)
        MatMap<T>(w.grad, n_out, n_in).noalias() += g * CVecMap<T>(x.value, n_in).transpose();
      if (b.grad) VecMap<T>(b.grad, n_out) += g;
      break;
    }
    case Op::kConv2d: {
      Node& x = nodes_[r.in[0]];
      Node& kn = nodes_[r.in[1]];
      Node& b = nodes_[r.in[2]];
      const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
      const int co = kn.shape[0], k = kn.shape[2];
      const int ho = out.shape[1], wo = out.shape[2];
      const int ckk = c * k * k, n = ho * wo;
      CMatMap<T> g(gy, co, n);
      if (kn.grad)
        MatMap<T>(kn.grad, co, ckk).noalias() += g * CMatMap<T>(r.saved, ckk, n).transpose();
      if (b.grad) VecMap<T>(b.grad, co) += g.rowwise().sum();
      if (x.grad) {
        RowMat<T> gcols = CMatMap<T>(kn.value, co, ckk).transpose() * g;
        col2im_add(gcols.data(), c, h, w, k, r.iparam, ho, wo, x.grad);
      }
      break;
    }
    case Op::kLstmCell: {
      Node& x = nodes_[r.in[0]];
      Node& h = nodes_[r.in[1]];
      Node& c = nodes_[r.in[2]];
      Node& w = nodes_[r.in[3]];
      Node& b = nodes_[r.in[4]];
      const T* gh = out.grad;
      const T* gc = nodes_[r.out2].grad;
      const int n = static_cast<int>(h.size);
      const int nx = static_cast<int>(x.size);
      const T* xh = r.saved;
      const T* gates = r.saved + nx + n;
      const T* tc = gates + 4 * n;
      Vec<T> dz(4 * n);
      for (int j = 0; j < n; ++j) {
        const T ig = gates[j], fg = gates[n + j], og = gates[2 * n + j], cand = gates[3 * n + j];
        const T gct = gc[j] + gh[j] * og * (T(1) - tc[j] * tc[j]);
        dz[j] = gct * cand * ig * (T(1) - ig);
        dz[n + j] = gct * c.value[j] * fg * (T(1) - fg);
        dz[2 * n + j] = gh[j] * tc[j] * og * (T(1) - og);
        dz[3 * n + j] = gct * ig * (T(1) - cand * cand);
        if (c.grad) c.grad[j] += gct * fg;
      }
      if (w.grad)
        MatMap<T>(w.grad, 4 * n, nx + n).noalias() += dz * CVecMap<T>(xh, nx + n).transpose();
      if (b.grad) VecMap<T>(b.grad, 4 * n) += dz;
      if (x.grad || h.grad) {
        Vec<T> gxh = CMatMap<T>(w.value, 4 * n, nx + n).transpose() * dz;
        if (x.grad) VecMap<T>(x.grad, nx) += gxh.head(nx);
        if (h.grad) VecMap<T>(h.grad, n) += gxh.tail(n);
      }
      break;
    }
    case Op::kRelu: {
      Node& x = nodes_[r.in[0]];
      for (std::size_t i = 0; i < out.size; ++i)
        if (out.value[i] > T(0)) x.grad[i] += gy[i];
      break;
    }
    case Op::kSigmoid: {
      Node& x = nodes_[r.in[0]];
      for (std::size_t i = 0; i < out.size; ++i) {
        const T y = out.value[i];
        x.grad[i] += gy[i] * y * (T(1) - y);
      }
      break;
    }
    case Op::kTanh: {
      Node& x = nodes_[r.in[0]];
      for (std::size_t i = 0; i < out.size; ++i) {
        const T y = out.value[i];
        x.grad[i] += gy[i] * (T(1) - y * y);
      }
      break;
    }
    case Op::kSoftmax: {
      Node& x = nodes_[r.in[0]];
      const int k = r.iparam;
      const int rows = static_cast<int>(out.size) / k;
      for (int row = 0; row < rows; ++row) {
        const T* y = out.value + row * k;
        const T* g = gy + row * k;
        T dot = 0;
        for (int j = 0; j < k; ++j) dot += g[j] * y[j];
        for (int j = 0; j < k; ++j) x.grad[row * k + j] += y[j] * (g[j] - dot);
      }
      break;
    }
    case Op::kLogSoftmax: {
      Node& x = nodes_[r.in[0]];
      const int k = r.iparam;
      const int rows = static_cast<int>(out.size) / k;
      for (int row = 0; row < rows; ++row) {
        const T* y = out.value + row * k;
        const T* g = gy + row * k;
        T sum = 0;
        for (int j = 0; j < k; ++j) sum += g[j];
        for (int j = 0; j < k; ++j) x.grad[row * k + j] += g[j] - std::exp(y[j]) * sum;
      }
      break;
    }
    case Op::kConcat: {
      const T* src = gy;
      for (int i = 0; i < r.iparam; ++i) {
        Node& p = nodes_[int_store_[r.ilist + i]];
        if (p.grad)
          for (std::size_t j = 0; j < p.size; ++j) p.grad[j] += src[j];
        src += p.size;
      }
      break;
    }
    case Op::kCategoricalNll: {
      Node& l = nodes_[r.in[0]];
      const int rows = r.iparam;
      const int k = static_cast<int>(l.size) / rows;
      const T scale = gy[0] / T(rows);
      for (int row = 0; row < rows; ++row) {
        const int cls = int_store_[r.ilist + row];
        for (int j = 0; j < k; ++j) {
          const T target = j == cls ? T(1) : T(0);
          l.grad[row * k + j] += scale * (r.saved[row * k + j] - target);
        }
      }
      break;
    }
    case Op::kBernoulliNll: {
      Node& l = nodes_[r.in[0]];
      l.grad[0] += gy[0] * (sigmoid_scalar(l.value[0]) - r.scalar);
      break;
    }
    case Op::kMse: {
      Node& p = nodes_[r.in[0]];
      const T scale = gy[0] * T(2) / static_cast<T>(p.size);
      for (std::size_t i = 0; i < p.size; ++i) p.grad[i] += scale * r.saved[i];
      break;
    }
    case Op::kPolicyEntropy: {
      Node& l = nodes_[r.in[0]];
      const int k = r.iparam;
      const int rows = static_cast<int>(l.size) / k;
      for (int row = 0; row < rows; ++row) {
        const T* p = r.saved + row * k;
        const T* lp = r.saved + l.size + row * k;
        T h = 0;
        for (int j = 0; j < k; ++j) h -= p[j] * lp[j];
        // dH/dz_j = -p_j (log p_j + H)
        for (int j = 0; j < k; ++j) l.grad[row * k + j] += gy[0] * (-p[j] * (lp[j] + h));
      }
      break;
    }
    case Op::kWeightedSum: {
      for (int i = 0; i < r.iparam; ++i) {
        Node& t = nodes_[int_store_[r.ilist + i]];
        if (!t.grad) continue;
        const T w = r.saved[i];
        for (std::size_t j = 0; j < t.size; ++j) t.grad[j] += w * gy[j];
      }
      break;
    }
  }
}

template <typename T>
std::vector<bool> Tape<T>::relu_pattern() const {
  std::vector<bool> out;
  for (const Record& r : records_) {
    if (r.op != Op::kRelu) continue;
    const Node& x = nodes_[r.in[0]];
    for (std::size_t i = 0; i < x.size; ++i) out.push_back(x.value[i] > T(0));
  }
  return out;
}

template class Arena<float>;
template class Arena<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace nav::ad
