#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uds {

enum class ErrorCode {
  kShapeMismatch,
  kNonfinite,
  kNotScalar,
  kMissingHead,
  kCycle,
  kDanglingHead,
  kEmptyInput,
  kDecodeOverflow,
  kMisaligned,
  kLengthMismatch,
  kNonfiniteLoss,
  kValueRange,
  kTooLarge,
  kIdMismatch,
  kDegenerate,
  kParseError,
  kValidationError,
  kUnsupportedVersion,
  kIo,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

// All recoverable failures in the toolkit are reported as uds::Error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace uds
