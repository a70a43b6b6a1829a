#pragma once

#include <stdexcept>
#include <string>

namespace cocorrect {

// Invalid configuration or arguments, detected before any compute.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or malformed input files.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while training or evaluating.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cocorrect
