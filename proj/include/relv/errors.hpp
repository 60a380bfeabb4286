#pragma once

#include <stdexcept>
#include <string>

namespace relv {

/// Input violates a structural invariant (probabilities, labels, weights).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A rule or operation parameter is out of range (grain <= 0, empty menu...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConditioningError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// DISCOUNT rule left with no probability mass after zeroing small priors.
class DegenerateProblemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace relv
