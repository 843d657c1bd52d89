// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace nav::ad {

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
void init_fan_in_uniform(std::span<T> w, int fan_in, std::mt19937_64& rng);

// Fills a rows x cols row-major block (leading dimension ld) with an
// orthogonal matrix drawn from the Haar measure (QR of a Gaussian matrix).
template <typename T>
void init_orthogonal(T* block, int rows, int cols, int ld, std::mt19937_64& rng, T gain = T(1));

}  // namespace nav::ad
