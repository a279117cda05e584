#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pcm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation (θ ∉ [-h,0], t outside a solution, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Integration exceeded the overflow guard.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double blowup_time)
      : Error(what), blowup_time_(blowup_time) {}
  double blowup_time() const { return blowup_time_; }

 private:
  double blowup_time_;
};

/// Right-hand side callback produced a non-finite value.
class RhsError : public Error {
 public:
  using Error::Error;
};

/// Iterative method (Newton, fixed point) did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> residuals)
      : Error(what), residuals_(std::move(residuals)) {}
  const std::vector<double>& residual_history() const { return residuals_; }

 private:
  std::vector<double> residuals_;
};

/// Singular or rank-deficient linear system.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Generic numerical failure (eigen-solver, ill-conditioned coordinate solve, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Spectral cluster too close to the rest of the spectrum.
class ClusterError : public NumericalError {
 public:
  ClusterError(const std::string& what, double gap) : NumericalError(what), gap_(gap) {}
  double gap() const { return gap_; }

 private:
  double gap_;
};

/// Fixed-point map failed to contract.
class ContractionError : public NumericalError {
 public:
  ContractionError(const std::string& what, double ratio) : NumericalError(what), ratio_(ratio) {}
  double ratio() const { return ratio_; }

 private:
  double ratio_;
};

/// Invalid configuration (syntax, unknown key, out-of-range value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unknown benchmark name.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// A pipeline step needs an artifact produced by an earlier command.
class DependencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace pcm
