#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bopdmd {

enum class ErrorCode {
  InvalidArgument,
  NonUniformSampling,
  RankTooLarge,
  InvalidRank,
  DegenerateEigenproblem,
  ZeroReference,
  EigenvalueOverflow,
  InvalidBagSize,
  TooFewAcceptedTrials,
  InsufficientModels,
  ShapeMismatch,
  ParseError,
  RaggedRows,
  NonIncreasingTimes,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it to an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonUniformSampling: return "NonUniformSampling";
    case ErrorCode::RankTooLarge: return "RankTooLarge";
    case ErrorCode::InvalidRank: return "InvalidRank";
    case ErrorCode::DegenerateEigenproblem: return "DegenerateEigenproblem";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::EigenvalueOverflow: return "EigenvalueOverflow";
    case ErrorCode::InvalidBagSize: return "InvalidBagSize";
    case ErrorCode::TooFewAcceptedTrials: return "TooFewAcceptedTrials";
    case ErrorCode::InsufficientModels: return "InsufficientModels";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::NonIncreasingTimes: return "NonIncreasingTimes";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace bopdmd
