// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace gridwatch {

// Each error class maps onto one CLI exit code (see cli/app.hpp).

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (feeder, scenario, CSV streams).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gridwatch
