#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sbsd {

enum class ErrorCode {
  InvalidOpcode,
  FieldOutOfRange,
  MemOutOfRange,
  PcOutOfRange,
  Precondition,
  ParseError,
  EmptyExamples,
  NotALeaf,
  VarAlreadyUsed,
  WidthMismatch,
  BudgetExhausted,
  MalformedArtifact,
  CorruptTrace,
  NoDependencies,
  PoolExhausted,
  LayoutMismatch,
  DomainTooLarge,
  MissingOracleEntry,
  PredictorUnsound,
  CycleLimitExceeded,
  GenerationFailed,
  IoFailure,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sbsd
