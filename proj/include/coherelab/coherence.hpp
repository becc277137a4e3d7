#pragma once

// Emotional coherence between self-reported mood (POMS) and the emotion labels
// of a session's client utterances, and its association with well-being (ORS)
// at the client level.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coherelab/model.hpp"

namespace coherelab::coherence {

enum class LabelField { Gold, Predicted };

std::string_view to_string(LabelField field);

// Label counts over client utterances only. Throws IncompleteSource when a
// client utterance lacks the requested label.
EmotionCounts emotion_counts(const SessionRecord& session, LabelField field);

// U_e = #u_e / sum over all four labels. Throws NoLabeledUtterances for a
// session without client utterances.
EmotionProportions emotion_proportions(const SessionRecord& session, LabelField field);

// p_pos = calmness + contentment + vigor, p_neg = anger + sad + anxiety.
PomsAggregate poms_aggregate(const PomsReport& report);

struct SessionFeatures {
  std::string session_id;
  std::string client_id;
  std::size_t session_index = 0;
  EmotionProportions proportions;
  PomsAggregate poms;
  std::optional<double> ors_total;
};

struct DroppedSession {
  std::string session_id;
  std::string reason;  // "NO_POMS" | "NO_LABELED_UTTERANCES"
};

struct FeatureSet {
  std::vector<SessionFeatures> features;
  std::vector<DroppedSession> dropped;
  std::size_t sessions_total = 0;
};

// One feature row per session with both client labels and a POMS report.
// Other sessions are listed in `dropped`, never imputed.
FeatureSet build_features(std::span<const SessionRecord> sessions, LabelField field);

// Pearson (U_e, P_e) over all sessions pooled across clients.
CoherenceResult sessionwide_coherence(std::span<const SessionFeatures> features, Polarity polarity,
                                      const AnalysisConfig& config = {});

struct ClientSummary {
  std::string client_id;
  std::size_t n_sessions = 0;
  std::optional<CoherenceResult> coherence_pos;  // absent when excluded for this polarity
  std::optional<CoherenceResult> coherence_neg;
  std::optional<double> mean_ors;                // mean ORS total over the client's sessions

  const std::optional<CoherenceResult>& coherence(Polarity p) const {
    return p == Polarity::Positive ? coherence_pos : coherence_neg;
  }
};

struct ClientExclusion {
  std::string client_id;
  std::string scope;   // "client", "pos", "neg" or "ors"
  std::string reason;  // TOO_FEW_SESSIONS | ZERO_VARIANCE | NO_ORS
};

struct ClientSummaries {
  std::vector<ClientSummary> summaries;  // clients with >= min_sessions_per_client sessions
  std::vector<ClientExclusion> exclusions;
};

// Per client: coherence over that client's own sessions for each polarity.
// Degenerate series are recorded as exclusions rather than failures.
ClientSummaries client_summaries(std::span<const SessionFeatures> features,
                                 const AnalysisConfig& config = {});

// Pearson between per-client coherence r and per-client mean ORS, over clients
// having both for `polarity`.
CoherenceResult coherence_ors_association(std::span<const ClientSummary> summaries, Polarity polarity,
                                          const AnalysisConfig& config = {});

// Report rows hold either a result or the error code that prevented one.
struct ReportRow {
  Polarity polarity = Polarity::Positive;
  std::optional<CoherenceResult> result;
  std::string error;
};

struct SessionwideReport {
  std::string label_source;
  AnalysisConfig config;
  std::size_t sessions_total = 0;
  std::vector<DroppedSession> dropped;
  std::vector<ReportRow> rows;  // pos, neg
};

struct AssociationReport {
  std::string label_source;
  AnalysisConfig config;
  std::size_t sessions_total = 0;
  std::vector<DroppedSession> dropped;
  ClientSummaries clients;
  std::vector<ReportRow> rows;  // pos, neg
};

SessionwideReport sessionwide_report(std::span<const SessionRecord> sessions, LabelField field,
                                     std::string label_source, const AnalysisConfig& config);
AssociationReport association_report(std::span<const SessionRecord> sessions, LabelField field,
                                     std::string label_source, const AnalysisConfig& config);

// `manifest` is the relative path of the run manifest the report refers to.
std::string to_json(const SessionwideReport& report, std::string_view manifest);
std::string to_json(const AssociationReport& report, std::string_view manifest);

// "(0.29, 7.8e-05)": r to two decimals, p to two significant digits.
std::string format_cell(const CoherenceResult& result);

// Table-style renderings. The session-wide table takes one report per column.
std::string render_sessionwide(std::span<const SessionwideReport> columns);
std::string render_association(const AssociationReport& report);

}  // namespace coherelab::coherence
