#pragma once

#include <stdexcept>
#include <string>

namespace finkey {

/// Malformed or inconsistent input data (corpus lines, ids, vocab files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument outside an operation's domain.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Training diverged (NaN/Inf loss or parameters).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace finkey
