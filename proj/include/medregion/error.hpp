#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medregion {

// Every failure the library reports carries one of these codes. The CLI maps
// them onto exit statuses (see is_io_error).
enum class ErrorCode {
  kInvalidArgument,
  kIoError,
  // volume_io
  kMalformedHeader,
  kUnsupportedDatatype,
  kTruncatedData,
  kSchemaViolation,
  kDimsMismatch,
  kEmptyTarget,
  kMissingRegion,
  // encoder
  kGridTooFine,
  kLevelShapeMismatch,
  // r2_pool
  kUnknownLevel,
  kNonDivisibleFactor,
  kChannelMismatch,
  // maskex
  kLevelMismatch,
  // prompt
  kStudyMismatch,
  kPromptTooLong,
  // reports
  kLabelCountMismatch,
  // llm_bridge
  kTimeout,
  kHttpError,
  kEmptyCompletion,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// True for failures caused by the environment (missing files, short reads,
// network) rather than by invalid content.
bool is_io_error(ErrorCode code);

}  // namespace medregion
