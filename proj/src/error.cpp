#include "dbsloc/error.hpp"

namespace dbs {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Corruption: return "corruption";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::EmptyRoi: return "empty-roi";
    case ErrorKind::GridMismatch: return "grid-mismatch";
    case ErrorKind::SingularTransform: return "singular-transform";
    case ErrorKind::InsufficientOverlap: return "insufficient-overlap";
    case ErrorKind::TrajectoryNotFound: return "trajectory-not-found";
    case ErrorKind::GroundTruth: return "ground-truth";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept { return 1 + static_cast<int>(kind); }

}  // namespace dbs
