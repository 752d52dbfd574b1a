#include "ai4ef/error.hpp"

#include <utility>

namespace ai4ef {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::UnrecognizedSource: return "UnrecognizedSource";
    case ErrorCode::UnsupportedSource: return "UnsupportedSource";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::HttpStatus: return "HttpStatus";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::UnseenCategory: return "UnseenCategory";
    case ErrorCode::BadRatio: return "BadRatio";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::Busy: return "Busy";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptWeights: return "CorruptWeights";
    case ErrorCode::NoCompleteTrial: return "NoCompleteTrial";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::Inconsistent: return "Inconsistent";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::TaskMismatch: return "TaskMismatch";
    case ErrorCode::NoModelDeployed: return "NoModelDeployed";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string message, std::string field, int status)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      field_(std::move(field)),
      status_(status) {}

Error Error::with_step(std::string step) const {
  Error tagged = *this;
  tagged.step_ = std::move(step);
  return tagged;
}

}  // namespace ai4ef
