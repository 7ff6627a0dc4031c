#pragma once

#include <stdexcept>
#include <string>

namespace doco {

// Dimension or shape mismatch between cooperating objects.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Gain synthesis failed (uncontrollable / undetectable pair, inconsistent
// regulator equations).
class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative numerical procedure did not converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scenario or configuration violates a validation rule. `rule()` names it.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string rule, const std::string& detail)
      : std::runtime_error(rule + ": " + detail), rule_(std::move(rule)) {}
  const std::string& rule() const noexcept { return rule_; }

 private:
  std::string rule_;
};

// Non-finite value produced during simulation.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

// Offline optimum could not be computed.
class OracleError : public std::runtime_error {
 public:
  OracleError(const std::string& what, double residual, bool infeasible)
      : std::runtime_error(what), residual_(residual), infeasible_(infeasible) {}
  double residual() const noexcept { return residual_; }
  bool infeasible() const noexcept { return infeasible_; }

 private:
  double residual_;
  bool infeasible_;
};

}  // namespace doco
