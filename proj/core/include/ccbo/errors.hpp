#pragma once

#include <stdexcept>
#include <string>

namespace ccbo {

// Input outside the declared design bounds or uncertainty support.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or unsupported configuration (CLI config, dimensions, tables).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A Gaussian-process model could not be built or factored.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The candidate point carries (numerically) zero posterior variance.
class DegeneratePointError : public ModelError {
 public:
  using ModelError::ModelError;
};

// Caller broke a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ccbo
