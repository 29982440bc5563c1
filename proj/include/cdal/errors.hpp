#pragma once

#include <stdexcept>
#include <string>

namespace cdal {

enum class ErrorCode {
  DimensionMismatch,
  NonFiniteEntry,
  UnsupportedShape,
  BoundOrderViolation,
  NegativeWeight,
  LengthMismatch,
  NonPositiveRho,
  ZeroDiagonal,
  IndexOutOfRange,
  InfeasibleWarmStart,
  InvalidConfig,
  RankDeficient,
  MaxIterationsExceeded,
  TooLarge,
  EmptyRange,
  EmptyLog,
  ParseError,
};

const char* to_string(ErrorCode code);

/// Library error carrying a machine-checkable code plus a human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::UnsupportedShape: return "UnsupportedShape";
    case ErrorCode::BoundOrderViolation: return "BoundOrderViolation";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonPositiveRho: return "NonPositiveRho";
    case ErrorCode::ZeroDiagonal: return "ZeroDiagonal";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InfeasibleWarmStart: return "InfeasibleWarmStart";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::EmptyRange: return "EmptyRange";
    case ErrorCode::EmptyLog: return "EmptyLog";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "UnknownError";
}

}  // namespace cdal
