#pragma once

#include <stdexcept>
#include <string>

namespace qtherm {

enum class ErrorKind {
  NotHermitian,
  InvalidState,
  InvalidSubsystem,
  DimMismatch,
  NumericalInstability,
  DegenerateSteadyState,
  TruncationTooSmall,
  NoCoupling,
  UnclassifiableState,
  InvalidParams,
  CutoffTooSmall,
  DegenerateSpectrum,
  SingularState,
  InvalidPOVM,
  NullNotBracketed,
  TooLarge,
  TargetUnreached,
  UndefinedFraction,
  InconsistentTrajectory,
  InvariantBreach,
};

const char* to_string(ErrorKind kind);

// Every module reports failures through this type; the CLI maps the kind to
// an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace qtherm
