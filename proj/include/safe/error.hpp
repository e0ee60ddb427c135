#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace safe {

enum class ErrorCode {
  InvalidArgument,
  FileNotFound,
  MissingColumn,
  ParseError,
  MissingValue,
  NonBinaryTarget,
  IndexOutOfRange,
  OverlappingSplit,
  DegenerateTrainPartition,
  SingleClassTarget,
  UnknownLevel,
  ExternalProtocolError,
  InvalidClusterCount,
  SchemaMismatch,
  ColumnMismatch,
  FormatVersionMismatch,
  CorruptFile,
};

const char* to_string(ErrorCode code);

// True for errors caused by bad inputs (files, flags, schemas) rather than
// by something going wrong while computing. The CLI maps these to exit 2.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised while reading tabular input; row is 1-based over data rows
/// (the header is not counted).
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t row, std::string column,
             const std::string& detail);

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

}  // namespace safe
