// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

namespace nav {

// Raised when a shape, architecture or config combination is invalid.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when input data violates a documented range.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an API is called in the wrong state (e.g. step after done).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nav
