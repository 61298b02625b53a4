#include "uds/error.hpp"

namespace uds {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kNonfinite: return "NONFINITE";
    case ErrorCode::kNotScalar: return "NOT_SCALAR";
    case ErrorCode::kMissingHead: return "MISSING_HEAD";
    case ErrorCode::kCycle: return "CYCLE";
    case ErrorCode::kDanglingHead: return "DANGLING_HEAD";
    case ErrorCode::kEmptyInput: return "EMPTY_INPUT";
    case ErrorCode::kDecodeOverflow: return "DECODE_OVERFLOW";
    case ErrorCode::kMisaligned: return "MISALIGNED";
    case ErrorCode::kLengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::kNonfiniteLoss: return "NONFINITE_LOSS";
    case ErrorCode::kValueRange: return "VALUE_RANGE";
    case ErrorCode::kTooLarge: return "TOO_LARGE";
    case ErrorCode::kIdMismatch: return "ID_MISMATCH";
    case ErrorCode::kDegenerate: return "DEGENERATE";
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kValidationError: return "VALIDATION_ERROR";
    case ErrorCode::kUnsupportedVersion: return "UNSUPPORTED_VERSION";
    case ErrorCode::kIo: return "IO_ERROR";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
  }
  return "UNKNOWN";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace uds
