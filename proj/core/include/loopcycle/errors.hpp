#pragma once

#include <stdexcept>
#include <string>

namespace loopcycle {

// Invalid argument values (outside box, bad exponent domain, open path).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Memory budgets, tail bounds, rejection floors.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : NumericError(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An internal invariant was violated. Never expected in correct runs.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class RejectionRateError : public ResourceError {
 public:
  RejectionRateError(const std::string& what, double rate, long long attempts)
      : ResourceError(what), rate_(rate), attempts_(attempts) {}
  double rate() const { return rate_; }
  long long attempts() const { return attempts_; }

 private:
  double rate_;
  long long attempts_;
};

}  // namespace loopcycle
