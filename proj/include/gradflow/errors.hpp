#pragma once

#include <stdexcept>
#include <string>

namespace gradflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition on an argument violated (shape mismatch, bad parameter, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Problem size exceeds an enumeration or factorial guard.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// A weight that must be strictly positive vanished (vacuum cell, empty species).
class SingularWeightError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Internal consistency check failed (constraint drift, positivity loss).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Non-finite state encountered during time integration.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

namespace detail {

template <typename E = ArgumentError>
inline void require(bool condition, const char* message) {
  if (!condition) throw E(message);
}

template <typename E = ArgumentError>
inline void require(bool condition, const std::string& message) {
  if (!condition) throw E(message);
}

}  // namespace detail
}  // namespace gradflow
