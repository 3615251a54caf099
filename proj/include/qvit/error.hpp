#pragma once

#include <stdexcept>
#include <string>

namespace qvit {

// Bad user input: malformed config, invariant violation, unreadable file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No accelerator configuration fits the device.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes handed to a simulator do not line up.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qvit
