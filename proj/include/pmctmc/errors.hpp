#ifndef PMCTMC_ERRORS_HPP
#define PMCTMC_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace pmctmc {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (state out of
/// bounds, row index out of range, invalid rate matrix).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Bad user input: unknown model name, malformed config, inconsistent flags.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside an estimator or solver.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SeedPathError : public Error {
 public:
  using Error::Error;
};

class ExplosionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A sequence that must be nondecreasing was observed to decrease.
/// `lower` and `upper` are the sequence indices that were compared
/// (value at `upper` was smaller than value at `lower`).
class MonotonicityError : public NumericalError {
 public:
  MonotonicityError(const std::string& what, long long lower, long long upper,
                    double lower_value, double upper_value)
      : NumericalError(what),
        lower_index(lower),
        upper_index(upper),
        lower_value(lower_value),
        upper_value(upper_value) {}

  long long lower_index;
  long long upper_index;
  double lower_value;
  double upper_value;
};

}  // namespace pmctmc

#endif  // PMCTMC_ERRORS_HPP
