#pragma once

#include <stdexcept>

namespace parachern {

/// Malformed or out-of-contract user input (CLI exit code 2).
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Two parabolic models whose divisor point sets differ.
class IncompatibleDivisors : public InputError {
public:
  using InputError::InputError;
};

/// Input lies outside what the implemented machinery covers.
class Unsupported : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// A numerical procedure failed to reach its target (CLI exit code 3).
class NumericalFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace parachern
