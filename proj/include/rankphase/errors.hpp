#pragma once

#include <stdexcept>
#include <string>

namespace rankphase {

// Malformed arguments: wrong dimensions, out-of-range parameters, bad files.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Regression against a rank vector (or score vector) with zero variance.
class DegenerateFitError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Exhaustive search asked to run beyond its size limit.
class RefusedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Experiment configuration that cannot be executed as written.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace rankphase
