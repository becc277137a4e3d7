#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coherelab {

// Machine-readable failure codes shared by every module.
enum class ErrorCode {
  // ingest
  MalformedLine,
  SchemaViolation,
  DuplicateUtterance,
  InconsistentSession,
  UnknownSession,
  DuplicateReport,
  RangeViolation,
  TargetsTherapist,
  UnknownUtterance,
  DuplicatePrediction,
  ScoresNotNormalized,
  LabelNotArgmax,
  IoError,
  // labeling
  IncompleteSource,
  NoTrainingData,
  // eval
  TooFewSessions,
  EmptyInput,
  FoldFailed,
  ExternalCommandFailed,
  // stats
  TooShort,
  ZeroVariance,
  NonConvergence,
  // coherence
  NoLabeledUtterances,
  // synth
  InfeasibleSpec,
  // generic
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Numerics failures signal a bug rather than bad input.
bool is_numerics_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace coherelab
