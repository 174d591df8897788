#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dbs {

/// Failure categories surfaced by the library. Each maps to a distinct CLI
/// exit code.
enum class ErrorKind {
  Io = 1,
  Format,
  Corruption,
  Unsupported,
  InvalidArgument,
  EmptyRoi,
  GridMismatch,
  SingularTransform,
  InsufficientOverlap,
  TrajectoryNotFound,
  GroundTruth,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Process exit code for an error category. 0 and 1 are reserved for
/// success and usage errors.
int exit_code(ErrorKind kind) noexcept;

}  // namespace dbs
