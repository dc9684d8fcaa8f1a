#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace graphheat {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (bad parameters, wrong family, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A value outside the mathematical domain of an operation (e.g. a non-positive weight).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A function was evaluated at a vertex where it has no value.
class MissingValueError : public Error {
 public:
  using Error::Error;
};

/// Materialization or search touched more vertices than the configured budget.
class BudgetExceededError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure did not converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A checked invariant failed; indicts the implementation, not the inputs.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Vertex budget for materialization; GRAPHHEAT_MAX_VERTICES overrides the default.
inline std::size_t default_vertex_budget() {
  constexpr std::size_t kDefault = 200000;
  if (const char* env = std::getenv("GRAPHHEAT_MAX_VERTICES")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return kDefault;
}

}  // namespace graphheat
