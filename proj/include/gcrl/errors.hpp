#pragma once

#include <stdexcept>
#include <string>

namespace gcrl {

// Precondition or input-shape violation.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite logits, ratios, gradients or objectives.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration key, value, or incompatible option combination.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, truncated, or otherwise corrupt files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gcrl
