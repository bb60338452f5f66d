#pragma once

#include <stdexcept>
#include <string>

namespace qsum {

// A run/experiment configuration that cannot be executed as given
// (missing f* for a dynamic rule, unknown algorithm name, bad field type).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An oracle or callback broke its contract at runtime: non-unit
// quasi-subgradient, gamma outside (0,2), nonpositive stepsize from a
// user schedule, selector output failing the normal-cone spot check.
class ContractViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf surfaced where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cyclic projection concluded the target set is (numerically) empty.
class InfeasibleSetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ratio steering direction vanished: the point is stationary for the
// component ratio, no unit quasi-subgradient can be selected.
class DegenerateDirection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qsum
