#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pnode {

/// Raised for malformed inputs: non-positive step sizes, mismatched dimensions,
/// covariances that are not PSD.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for failures that happen while a solve is running. Carries the mesh
/// time at which the failure was detected.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double t)
      : std::runtime_error(what + " (t=" + std::to_string(t) + ")"), t_(t) {}

  [[nodiscard]] double time() const noexcept { return t_; }

 private:
  double t_;
};

/// Innovation variance S = H P H^T + R is not positive.
class SingularInnovation : public SolverError {
 public:
  using SolverError::SolverError;
};

/// The dynamics (or its Jacobian) produced a non-finite value.
class DynamicsError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Mean or covariance became non-finite.
class DivergenceError : public SolverError {
 public:
  DivergenceError(const std::string& what, double t, std::size_t step)
      : SolverError(what + " at step " + std::to_string(step), t), step_(step) {}

  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Kernel matrix could not be factorized even after jitter escalation.
class QuadratureConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad command-line or config-file input. `key()` names the offending entry.
class UsageError : public std::runtime_error {
 public:
  UsageError(const std::string& key, const std::string& what)
      : std::runtime_error(what), key_(key) {}

  [[nodiscard]] const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace pnode
