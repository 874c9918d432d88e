#pragma once

#include <stdexcept>
#include <string>

namespace orbit {

// Base type for everything the library throws on its own behalf.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidAlgebraVector : Error { using Error::Error; };
struct BasisMismatch : Error { using Error::Error; };
struct LogBranchError : Error { using Error::Error; };
struct NotAdClosed : Error { using Error::Error; };
struct DimError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct NestingError : Error { using Error::Error; };
struct SubalgebraClosureError : Error { using Error::Error; };
struct SingularFit : Error { using Error::Error; };
struct GridBudgetError : Error { using Error::Error; };

// Carries the index of the integration step that produced a non-finite state.
struct NumericalBlowup : Error {
  explicit NumericalBlowup(const std::string& what, long step = -1)
      : Error(what), step_index(step) {}
  long step_index;
};

}  // namespace orbit
