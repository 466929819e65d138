#include "devo/error.hpp"

namespace devo {

ErrorCategory category(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ConfigError:
      return ErrorCategory::Config;
    case ErrorKind::GradientOverflow:
    case ErrorKind::SpeciesViolation:
    case ErrorKind::BoostFailure:
      return ErrorCategory::Training;
    default:
      return ErrorCategory::Data;
  }
}

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidRecording: return "InvalidRecording";
    case ErrorKind::SignalTooShort: return "SignalTooShort";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::NyquistViolation: return "NyquistViolation";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::EmptySelection: return "EmptySelection";
    case ErrorKind::SpeciesViolation: return "SpeciesViolation";
    case ErrorKind::GradientOverflow: return "GradientOverflow";
    case ErrorKind::DatasetError: return "DatasetError";
    case ErrorKind::StratificationError: return "StratificationError";
    case ErrorKind::BoostFailure: return "BoostFailure";
    case ErrorKind::EvalError: return "EvalError";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace devo
