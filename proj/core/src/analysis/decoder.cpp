// SPDX-License-Identifier: Apache-2.0
#include "nav/analysis/decoder.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "nav/errors.hpp"

namespace nav::analysis {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

void Dataset::add(std::span<const float> x, int label, int episode) {
  if (dim == 0 && labels.empty()) dim = static_cast<int>(x.size());
  if (static_cast<int>(x.size()) != dim)
    throw DataError("feature width " + std::to_string(x.size()) + " != " + std::to_string(dim));
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
  episodes.push_back(episode);
}

int DecoderModel::predict(std::span<const float> x) const {
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < num_classes; ++k) {
    double v = bias[k];
    const double* w = weights.data() + static_cast<std::size_t>(k) * dim;
    for (int j = 0; j < dim; ++j) v += w[j] * (x[j] - mean[j]) * inv_std[j];
    if (v > best_v) {
      best_v = v;
      best = k;
    }
  }
  return best;
}

double DecoderModel::accuracy(const Dataset& d) const {
  if (d.size() == 0) return 0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < d.size(); ++i) hit += predict(d.row(i)) == d.labels[i];
  return static_cast<double>(hit) / static_cast<double>(d.size());
}

namespace {

struct Split {
  Mat x;
  std::vector<int> y;
};

// Mean cross-entropy; fills probabilities - onehot into `resid` when given.
double loss_and_residual(const Mat& x, const std::vector<int>& y, const Mat& w, const Vec& b,
                         Mat* resid) {
  Mat logits = x * w.transpose();
  logits.rowwise() += b.transpose();
  double loss = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double mx = row.maxCoeff();
    row.array() = (row.array() - mx).exp();
    const double z = row.sum();
    row /= z;
    loss -= std::log(std::max(row(y[i]), 1e-300));
    if (resid) row(y[i]) -= 1.0;
  }
  if (resid) *resid = std::move(logits);
  return loss / static_cast<double>(std::max<Eigen::Index>(1, x.rows()));
}

}  // namespace

DecoderResult train_position_decoder(const Dataset& data, int num_classes,
                                     const DecoderOptions& opt) {
  if (num_classes < 2) throw DataError("decoder needs at least two classes");
  for (int l : data.labels)
    if (l < 0 || l >= num_classes) throw DataError("label " + std::to_string(l) + " out of range");
  const std::set<int> classes(data.labels.begin(), data.labels.end());
  if (classes.size() < 2) throw DataError("decoder dataset covers fewer than two cells");
  if (opt.holdout_every < 2) throw ConfigError("holdout_every must be >= 2");

  std::vector<int> eps(data.episodes);
  std::sort(eps.begin(), eps.end());
  eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
  std::set<int> held;
  for (std::size_t i = 0; i < eps.size(); ++i)
    if (i % opt.holdout_every == static_cast<std::size_t>(opt.holdout_every - 1)) held.insert(eps[i]);
  if (held.empty() || held.size() == eps.size())
    throw DataError("decoder needs episodes on both sides of the held-out split");

  const int d = data.dim;
  DecoderModel m;
  m.num_classes = num_classes;
  m.dim = d;
  m.mean.assign(d, 0.0);
  m.inv_std.assign(d, 1.0);

  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < data.size(); ++i)
    (held.count(data.episodes[i]) ? te : tr).push_back(i);

  // Standardise with training statistics.
  std::vector<double> var(d, 0.0);
  for (std::size_t i : tr) {
    auto r = data.row(i);
    for (int j = 0; j < d; ++j) m.mean[j] += r[j];
  }
  for (double& v : m.mean) v /= static_cast<double>(tr.size());
  for (std::size_t i : tr) {
    auto r = data.row(i);
    for (int j = 0; j < d; ++j) var[j] += (r[j] - m.mean[j]) * (r[j] - m.mean[j]);
  }
  for (int j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(tr.size()));
    m.inv_std[j] = sd > 1e-8 ? 1.0 / sd : 0.0;
  }
  auto build = [&](const std::vector<std::size_t>& idx) {
    Split s;
    s.x.resize(static_cast<Eigen::Index>(idx.size()), d);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto row = data.row(idx[r]);
      for (int j = 0; j < d; ++j) s.x(r, j) = (row[j] - m.mean[j]) * m.inv_std[j];
      s.y.push_back(data.labels[idx[r]]);
    }
    return s;
  };
  const Split train = build(tr);
  const Split test = build(te);
  const double n = static_cast<double>(train.x.rows());

  // Softmax cross-entropy curvature is bounded by 0.5 * lambda_max of the
  // augmented covariance [x 1]^T [x 1] / n.
  Vec v = Vec::Ones(d + 1).normalized();
  double lambda = 1.0;
  for (int it = 0; it < 50; ++it) {
    Vec xv = train.x * v.head(d);
    xv.array() += v(d);
    Vec next(d + 1);
    next.head(d) = train.x.transpose() * xv / n;
    next(d) = xv.sum() / n;
    lambda = next.norm();
    if (lambda <= 0) break;
    v = next / lambda;
  }
  const double step = 1.0 / (0.5 * std::max(lambda, 1e-12) * 1.05 + opt.l2);

  // Nesterov-accelerated gradient descent with early stopping on held-out
  // cross-entropy.
  Mat w = Mat::Zero(num_classes, d);
  Vec b = Vec::Zero(num_classes);
  Mat yw = w;
  Vec yb = b;
  Mat best_w = w;
  Vec best_b = b;
  double best_loss = loss_and_residual(test.x, test.y, w, b, nullptr);
  int since_best = 0;
  int it = 0;
  Mat resid;
  for (; it < opt.max_iters && since_best < opt.patience; ++it) {
    loss_and_residual(train.x, train.y, yw, yb, &resid);
    const Mat gw = resid.transpose() * train.x / n + opt.l2 * yw;
    const Vec gb = resid.colwise().sum().transpose() / n;
    const Mat w_next = yw - step * gw;
    const Vec b_next = yb - step * gb;
    const double mom = static_cast<double>(it) / (it + 3);
    yw = w_next + mom * (w_next - w);
    yb = b_next + mom * (b_next - b);
    w = w_next;
    b = b_next;
    const double l = loss_and_residual(test.x, test.y, w, b, nullptr);
    if (l < best_loss - 1e-12) {
      best_loss = l;
      best_w = w;
      best_b = b;
      since_best = 0;
    } else {
      ++since_best;
    }
  }
  m.weights.assign(best_w.data(), best_w.data() + best_w.size());
  m.bias.assign(best_b.data(), best_b.data() + best_b.size());

  Dataset train_set, test_set;
  for (std::size_t i : tr) train_set.add(data.row(i), data.labels[i], data.episodes[i]);
  for (std::size_t i : te) test_set.add(data.row(i), data.labels[i], data.episodes[i]);
  DecoderResult r;
  r.model = std::move(m);
  r.iterations = it;
  r.train_size = tr.size();
  r.heldout_size = te.size();
  r.train_accuracy = r.model.accuracy(train_set);
  r.heldout_accuracy = r.model.accuracy(test_set);
  return r;
}

}  // namespace nav::analysis
