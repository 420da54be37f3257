#pragma once

#include <stdexcept>
#include <string>

namespace qdirsim {

/// Base class for every error raised by the library. The message is
/// prefixed with the module that raised it ("optics: ...").
class Error : public std::runtime_error {
 public:
  Error(const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what) {}
};

/// An input outside the validity range of a relation (e.g. small-angle bound).
class DomainError : public Error {
  using Error::Error;
};

/// The grid is too coarse for the requested image bandwidth.
class AliasingError : public Error {
  using Error::Error;
};

/// An operation removed (numerically) all probability from a state.
class NullStateError : public Error {
  using Error::Error;
};

/// Conditioning on an outcome of (numerically) zero probability.
class ConditioningError : public Error {
  using Error::Error;
};

class InsufficientDataError : public Error {
  using Error::Error;
};

/// Source directions cannot be resolved from the supplied events.
class NonIdentifiableError : public Error {
  using Error::Error;
};

class DegenerateError : public Error {
  using Error::Error;
};

/// Scenario configuration could not be parsed or validated.
class ConfigError : public Error {
  using Error::Error;
};

}  // namespace qdirsim
