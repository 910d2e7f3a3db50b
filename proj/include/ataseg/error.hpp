#pragma once

#include <stdexcept>
#include <string>

namespace ataseg {

// Invalid configuration: bad shapes, out-of-range hyperparameters, unknown
// enum names. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// API misuse by the caller: stale tapes, mismatched lengths, out-of-bounds
// label coordinates.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed, truncated or version-mismatched files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss during training or adaptation.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ataseg
