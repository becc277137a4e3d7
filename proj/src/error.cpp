#include "coherelab/error.hpp"

namespace coherelab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine: return "MALFORMED_LINE";
    case ErrorCode::SchemaViolation: return "SCHEMA_VIOLATION";
    case ErrorCode::DuplicateUtterance: return "DUPLICATE_UTTERANCE";
    case ErrorCode::InconsistentSession: return "INCONSISTENT_SESSION";
    case ErrorCode::UnknownSession: return "UNKNOWN_SESSION";
    case ErrorCode::DuplicateReport: return "DUPLICATE_REPORT";
    case ErrorCode::RangeViolation: return "RANGE_VIOLATION";
    case ErrorCode::TargetsTherapist: return "TARGETS_THERAPIST";
    case ErrorCode::UnknownUtterance: return "UNKNOWN_UTTERANCE";
    case ErrorCode::DuplicatePrediction: return "DUPLICATE_PREDICTION";
    case ErrorCode::ScoresNotNormalized: return "SCORES_NOT_NORMALIZED";
    case ErrorCode::LabelNotArgmax: return "LABEL_NOT_ARGMAX";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::IncompleteSource: return "INCOMPLETE_SOURCE";
    case ErrorCode::NoTrainingData: return "NO_TRAINING_DATA";
    case ErrorCode::TooFewSessions: return "TOO_FEW_SESSIONS";
    case ErrorCode::EmptyInput: return "EMPTY_INPUT";
    case ErrorCode::FoldFailed: return "FOLD_FAILED";
    case ErrorCode::ExternalCommandFailed: return "EXTERNAL_COMMAND_FAILED";
    case ErrorCode::TooShort: return "TOO_SHORT";
    case ErrorCode::ZeroVariance: return "ZERO_VARIANCE";
    case ErrorCode::NonConvergence: return "NONCONVERGENCE";
    case ErrorCode::NoLabeledUtterances: return "NO_LABELED_UTTERANCES";
    case ErrorCode::InfeasibleSpec: return "INFEASIBLE_SPEC";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
  }
  return "UNKNOWN";
}

bool is_numerics_error(ErrorCode code) { return code == ErrorCode::NonConvergence; }

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace coherelab
