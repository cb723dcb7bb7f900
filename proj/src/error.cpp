#include "sevo/error.hpp"

namespace sevo {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::LutSizeMismatch: return "LutSizeMismatch";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::NonPositiveInverseDepth: return "NonPositiveInverseDepth";
    case ErrorCode::DisparityTooSmall: return "DisparityTooSmall";
    case ErrorCode::InsufficientCells: return "InsufficientCells";
    case ErrorCode::SingularReducedSystem: return "SingularReducedSystem";
    case ErrorCode::NoSharedMeasurements: return "NoSharedMeasurements";
    case ErrorCode::NoMatches: return "NoMatches";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::InsufficientSpan: return "InsufficientSpan";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::DiskWrite: return "DiskWrite";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace sevo
