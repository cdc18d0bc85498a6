#pragma once

#include <stdexcept>
#include <string>

namespace mfg {

/// Precondition violated by the caller (bad exponent, grid mismatch, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to bracket, converge or stay monotone.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The computed solution has no support above the requested mass cutoff.
class DegenerateSolution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The objective is not finite at the starting point of a minimization.
class InvalidInit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mfg
