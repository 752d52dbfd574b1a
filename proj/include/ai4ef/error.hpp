#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ai4ef {

enum class ErrorCode {
  // domain / validation
  UnknownClass,
  MissingField,
  OutOfRange,
  UnknownField,
  InvalidValue,
  // ingest
  UnrecognizedSource,
  UnsupportedSource,
  IoError,
  HttpStatus,
  MalformedCsv,
  SchemaMismatch,
  EmptyTable,
  UnseenCategory,
  BadRatio,
  TooFewRows,
  Busy,
  // neural
  ShapeMismatch,
  EmptyDataset,
  InvalidConfig,
  VersionMismatch,
  CorruptWeights,
  // tune / evaluate
  NoCompleteTrial,
  LengthMismatch,
  Empty,
  // orchestrate / serve
  Inconsistent,
  MissingArtifact,
  NotFound,
  TaskMismatch,
  NoModelDeployed,
  UnsupportedFormat,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `field` names the offending input where one exists
/// (a record key, a column, a pipeline step dependency); `status` carries the
/// HTTP code for HttpStatus errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string field = {}, int status = 0);

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }
  int status() const noexcept { return status_; }

  /// Pipeline step the error surfaced in ("fetch", "clean", ...), empty if untagged.
  const std::string& step() const noexcept { return step_; }
  Error with_step(std::string step) const;

 private:
  ErrorCode code_;
  std::string field_;
  int status_;
  std::string step_;
};

}  // namespace ai4ef
