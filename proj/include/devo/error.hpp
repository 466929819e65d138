#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace devo {

/// Failure classes raised across the pipeline. The category() of each kind
/// decides the CLI exit code.
enum class ErrorKind {
  InvalidRecording,
  SignalTooShort,
  ParseError,
  SchemaError,
  NyquistViolation,
  ShapeError,
  ConfigError,
  EmptySelection,
  SpeciesViolation,
  GradientOverflow,
  DatasetError,
  StratificationError,
  BoostFailure,
  EvalError,
  EmptySequence,
  IoError,
};

enum class ErrorCategory { Config, Data, Training };

ErrorCategory category(ErrorKind kind) noexcept;
std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace devo
