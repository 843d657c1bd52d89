// SPDX-License-Identifier: Apache-2.0
#include "nav/autodiff/init.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace nav::ad {

template <typename T>
void init_fan_in_uniform(std::span<T> w, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (T& v : w) v = static_cast<T>(u(rng));
}

template <typename T>
void init_orthogonal(T* block, int rows, int cols, int ld, std::mt19937_64& rng, T gain) {
  const int n = std::max(rows, cols);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix so the distribution is uniform over the orthogonal group.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      block[static_cast<std::size_t>(i) * ld + j] = static_cast<T>(gain * q(i, j));
}

template void init_fan_in_uniform<float>(std::span<float>, int, std::mt19937_64&);
template void init_fan_in_uniform<double>(std::span<double>, int, std::mt19937_64&);
template void init_orthogonal<float>(float*, int, int, int, std::mt19937_64&, float);
template void init_orthogonal<double>(double*, int, int, int, std::mt19937_64&, double);

}  // namespace nav::ad
