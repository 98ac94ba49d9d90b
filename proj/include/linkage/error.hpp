#pragma once

#include <stdexcept>
#include <string>

namespace linkage {

enum class ErrorCode {
  Structural,       // malformed adjacency, index out of range
  Degenerate,       // i == j, coincident points, collinear dyad
  Constraint,       // operator precondition violated
  NotDyadic,        // solution walk stalled
  Budget,           // resample / attempt cap exhausted
  Format,           // record parse failures
  Version,          // unknown schema version
  Reference,        // dangling id
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Structural: return "structural";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::Constraint: return "constraint";
    case ErrorCode::NotDyadic: return "not_dyadic";
    case ErrorCode::Budget: return "budget";
    case ErrorCode::Format: return "format";
    case ErrorCode::Version: return "version";
    case ErrorCode::Reference: return "reference";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace linkage
