#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace banditstop {

/// Invalid user configuration: inverted box, non-PD covariance, out-of-range
/// schedule values. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke a documented precondition (dimension mismatch, asymmetric
/// matrix, too few samples).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Argument outside the mathematical domain of a formula (p_t = 0, delta = 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// No usable estimate for an arm: every batch Gram singular, or too few
/// observations for a residual variance.
class EstimatorUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A closed form requested outside the case it was derived for.
class UnsupportedCase : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An output path could not be created or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The rejection sampler accepted nothing within its attempt budget.
class InfeasibleConditioning : public std::runtime_error {
 public:
  InfeasibleConditioning(std::uint64_t attempts, const std::string& what)
      : std::runtime_error(what), attempts_(attempts) {}

  std::uint64_t attempts() const noexcept { return attempts_; }

 private:
  std::uint64_t attempts_;
};

}  // namespace banditstop
