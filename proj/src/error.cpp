#include "medregion/error.hpp"

namespace medregion {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kUnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::kTruncatedData: return "TruncatedData";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kDimsMismatch: return "DimsMismatch";
    case ErrorCode::kEmptyTarget: return "EmptyTarget";
    case ErrorCode::kMissingRegion: return "MissingRegion";
    case ErrorCode::kGridTooFine: return "GridTooFine";
    case ErrorCode::kLevelShapeMismatch: return "LevelShapeMismatch";
    case ErrorCode::kUnknownLevel: return "UnknownLevel";
    case ErrorCode::kNonDivisibleFactor: return "NonDivisibleFactor";
    case ErrorCode::kChannelMismatch: return "ChannelMismatch";
    case ErrorCode::kLevelMismatch: return "LevelMismatch";
    case ErrorCode::kStudyMismatch: return "StudyMismatch";
    case ErrorCode::kPromptTooLong: return "PromptTooLong";
    case ErrorCode::kLabelCountMismatch: return "LabelCountMismatch";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kHttpError: return "HttpError";
    case ErrorCode::kEmptyCompletion: return "EmptyCompletion";
  }
  return "Unknown";
}

bool is_io_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError:
    case ErrorCode::kTruncatedData:
    case ErrorCode::kTimeout:
    case ErrorCode::kHttpError:
    case ErrorCode::kEmptyCompletion:
      return true;
    default:
      return false;
  }
}

}  // namespace medregion
