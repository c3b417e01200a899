#include "tsf/error.hpp"

namespace tsf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonUniformSampling: return "NonUniformSampling";
    case ErrorCode::NonNumericValue: return "NonNumericValue";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::EvenTrendWindow: return "EvenTrendWindow";
    case ErrorCode::InvalidClockTime: return "InvalidClockTime";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorCode::EmptyNeighborSet: return "EmptyNeighborSet";
    case ErrorCode::MissingNeighbors: return "MissingNeighbors";
    case ErrorCode::UnexpectedNeighbors: return "UnexpectedNeighbors";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::HttpStatusError: return "HttpStatusError";
    case ErrorCode::TimeoutError: return "TimeoutError";
    case ErrorCode::ReplayMiss: return "ReplayMiss";
    case ErrorCode::NoListFound: return "NoListFound";
    case ErrorCode::WrongCount: return "WrongCount";
    case ErrorCode::NonNumericElement: return "NonNumericElement";
    case ErrorCode::MalformedPatchList: return "MalformedPatchList";
    case ErrorCode::NoParsedWindows: return "NoParsedWindows";
    case ErrorCode::MismatchedRuns: return "MismatchedRuns";
    case ErrorCode::ZeroBaseline: return "ZeroBaseline";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NoOverlap: return "NoOverlap";
  }
  return "Unknown";
}

}  // namespace tsf
