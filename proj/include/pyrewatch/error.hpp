#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pyrewatch {

enum class ErrorCode {
  CoordinateDomain,
  FrameSize,
  FrameFormat,
  Corrupt,
  UnknownType,
  PayloadSize,
  DegenerateGeometry,
  DegenerateReference,
  InsufficientReplicates,
  CapacityExceeded,
  Config,
  LogParse,
  Csv,
  Usage,
  Internal,
};

// Machine-parseable tag printed by the CLI as `error[TAG]:`.
constexpr std::string_view error_tag(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::CoordinateDomain: return "COORDINATE_DOMAIN";
    case ErrorCode::FrameSize: return "FRAME_SIZE";
    case ErrorCode::FrameFormat: return "FRAME_FORMAT";
    case ErrorCode::Corrupt: return "CORRUPT";
    case ErrorCode::UnknownType: return "UNKNOWN_TYPE";
    case ErrorCode::PayloadSize: return "PAYLOAD_SIZE";
    case ErrorCode::DegenerateGeometry: return "DEGENERATE_GEOMETRY";
    case ErrorCode::DegenerateReference: return "DEGENERATE_REFERENCE";
    case ErrorCode::InsufficientReplicates: return "INSUFFICIENT_REPLICATES";
    case ErrorCode::CapacityExceeded: return "CAPACITY_EXCEEDED";
    case ErrorCode::Config: return "CONFIG";
    case ErrorCode::LogParse: return "LOG_PARSE";
    case ErrorCode::Csv: return "CSV";
    case ErrorCode::Usage: return "USAGE";
    case ErrorCode::Internal: return "INTERNAL";
  }
  return "INTERNAL";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view tag() const noexcept { return error_tag(code_); }

 private:
  ErrorCode code_;
};

}  // namespace pyrewatch
