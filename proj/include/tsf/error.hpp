#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsf {

enum class ErrorCode {
  // dataset
  MissingColumn,
  NonUniformSampling,
  NonNumericValue,
  EmptyFile,
  SeriesTooShort,
  NonFiniteValue,
  // patching
  WindowTooLarge,
  EvenTrendWindow,
  InvalidClockTime,
  LengthMismatch,
  // neighbors
  EmptyPool,
  // prompting
  UnboundPlaceholder,
  EmptyNeighborSet,
  MissingNeighbors,
  UnexpectedNeighbors,
  // llm gateway
  TransportError,
  HttpStatusError,
  TimeoutError,
  ReplayMiss,
  // parsing
  NoListFound,
  WrongCount,
  NonNumericElement,
  MalformedPatchList,
  // evaluation
  NoParsedWindows,
  MismatchedRuns,
  ZeroBaseline,
  IoError,
  // cli
  ConfigError,
  NoOverlap,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code next
/// to the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tsf
