#pragma once

#include <stdexcept>
#include <string>

namespace esdf {

/// Malformed or out-of-range input data (bad file rows, negative delays,
/// feature indices past the declared dimension).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent or invalid configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A structural invariant was violated, e.g. a sample that is converted but
/// never clicked.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite loss, non-positive log argument, or a degenerate denominator.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric that is undefined for the given input (single-class AUC,
/// no valid GAUC group, empty histogram).
class UndefinedMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace esdf
