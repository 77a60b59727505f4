#pragma once

#include <stdexcept>
#include <string>

namespace cgl {

/// Bad input: inconsistent dimensions, inadmissible potential, invalid parameters.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A requested computation exceeds its configured size or time budget.
class BudgetError : public std::runtime_error {
 public:
  BudgetError(const std::string& what, double estimate)
      : std::runtime_error(what), estimate_(estimate) {}
  double estimate() const { return estimate_; }

 private:
  double estimate_;
};

/// A trajectory left the finite region allowed by the blow-up threshold.
class BlowupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cgl
