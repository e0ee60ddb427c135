#include "safe/error.hpp"

namespace safe {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::NonBinaryTarget: return "NonBinaryTarget";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::OverlappingSplit: return "OverlappingSplit";
    case ErrorCode::DegenerateTrainPartition: return "DegenerateTrainPartition";
    case ErrorCode::SingleClassTarget: return "SingleClassTarget";
    case ErrorCode::UnknownLevel: return "UnknownLevel";
    case ErrorCode::ExternalProtocolError: return "ExternalProtocolError";
    case ErrorCode::InvalidClusterCount: return "InvalidClusterCount";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::ColumnMismatch: return "ColumnMismatch";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownLevel:
    case ErrorCode::ExternalProtocolError:
      return false;
    default:
      return true;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

ParseError::ParseError(ErrorCode code, std::size_t row, std::string column,
                       const std::string& detail)
    : Error(code, "row " + std::to_string(row) + ", column '" + column +
                      "': " + detail),
      row_(row),
      column_(std::move(column)) {}

}  // namespace safe
