#pragma once

#include <stdexcept>
#include <string>

namespace sevo {

enum class ErrorCode {
  MalformedRecord,
  NonMonotonicTimestamp,
  LutSizeMismatch,
  NonPositiveDepth,
  NonPositiveInverseDepth,
  DisparityTooSmall,
  InsufficientCells,
  SingularReducedSystem,
  NoSharedMeasurements,
  NoMatches,
  DegenerateConfiguration,
  InsufficientSpan,
  EmptyStream,
  DiskWrite,
  InvalidConfig,
  IoError,
};

const char* error_code_name(ErrorCode code);

// Exception for cold-path failures (file io, configuration, degenerate
// inputs). Hot-path per-measurement failures are flags on the measurement
// structs instead.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace sevo
