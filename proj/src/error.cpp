#include "sbsd/error.hpp"

namespace sbsd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidOpcode: return "InvalidOpcode";
    case ErrorCode::FieldOutOfRange: return "FieldOutOfRange";
    case ErrorCode::MemOutOfRange: return "MemOutOfRange";
    case ErrorCode::PcOutOfRange: return "PcOutOfRange";
    case ErrorCode::Precondition: return "Precondition";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyExamples: return "EmptyExamples";
    case ErrorCode::NotALeaf: return "NotALeaf";
    case ErrorCode::VarAlreadyUsed: return "VarAlreadyUsed";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::MalformedArtifact: return "MalformedArtifact";
    case ErrorCode::CorruptTrace: return "CorruptTrace";
    case ErrorCode::NoDependencies: return "NoDependencies";
    case ErrorCode::PoolExhausted: return "PoolExhausted";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::DomainTooLarge: return "DomainTooLarge";
    case ErrorCode::MissingOracleEntry: return "MissingOracleEntry";
    case ErrorCode::PredictorUnsound: return "PredictorUnsound";
    case ErrorCode::CycleLimitExceeded: return "CycleLimitExceeded";
    case ErrorCode::GenerationFailed: return "GenerationFailed";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

}  // namespace sbsd
