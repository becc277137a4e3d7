#pragma once

// Synthetic corpora with planted ground truth.
//
// Per session, a Gaussian latent drives the share of positive (negative)
// client utterances through the normal CDF; the share is discretized into
// whole utterances. The POMS positive (negative) subscales are then drawn
// from a Gaussian copula paired with the realized share, with the Gaussian
// correlation calibrated as 2 sin(pi r / 6) so that the Pearson correlation
// of the uniform-margined pair equals the requested r.
//
// Per client, the realized within-client coherence values are standardized
// and mixed with independent noise to produce the client's mean ORS, so the
// population correlation between coherence and well-being equals the
// requested association.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coherelab/ingest.hpp"
#include "coherelab/model.hpp"

namespace coherelab::synth {

struct CountRange {
  std::size_t min = 0;
  std::size_t max = 0;
};

struct SynthSpec {
  std::size_t n_clients = 20;
  std::size_t sessions_per_client = 10;
  CountRange utterances_per_session{12, 30};  // client utterances; each follows a therapist turn
  CountRange tokens_per_utterance{4, 12};
  double r_pos = 0.3;  // session-level coherence targets
  double r_neg = 0.3;
  double a_pos = 0.0;  // client-level coherence-ORS association targets
  double a_neg = 0.0;
  LabelScores label_skew{0.25, 0.25, 0.35, 0.15};
  std::size_t vocab_size = 40;      // tokens per label vocabulary
  double shared_vocab_rate = 0.0;   // share of tokens drawn from a label-independent vocabulary
  double poms_subscale_max = 8.0;
  std::uint64_t seed = 0;
};

// JSON with the field names above; missing fields keep their defaults,
// unknown fields are rejected.
SynthSpec parse_spec(std::string_view json_text);
std::string spec_to_json(const SynthSpec& spec);

struct SessionTruth {
  std::string session_id;
  std::string client_id;
  std::size_t session_index = 0;
  double u_pos_latent = 0.0;  // continuous share before discretization
  double u_neg_latent = 0.0;
  double u_pos = 0.0;  // realized share, exactly as encoded in the labels
  double u_neg = 0.0;
  double p_pos = 0.0;  // realized POMS aggregates, exactly as encoded in the report
  double p_neg = 0.0;
  double ors_total = 0.0;
};

struct ClientTruth {
  std::string client_id;
  std::optional<double> coherence_pos;  // realized within-client Pearson r
  std::optional<double> coherence_neg;
  double wellbeing_latent = 0.0;
  double mean_ors = 0.0;
};

struct GroundTruth {
  SynthSpec spec;
  double gaussian_rho_pos = 0.0;
  double gaussian_rho_neg = 0.0;
  std::vector<SessionTruth> sessions;
  std::vector<ClientTruth> clients;
};

struct RealizedCorrelations {
  std::optional<double> session_pos;         // Pearson(u_pos, p_pos) over all sessions
  std::optional<double> session_neg;
  std::optional<double> session_pos_latent;  // Pearson(u_pos_latent, p_pos)
  std::optional<double> session_neg_latent;
  std::optional<double> association_pos;     // Pearson(coherence_pos, mean_ors) over clients
  std::optional<double> association_neg;
};

struct SynthOutput {
  ingest::CorpusBundle bundle;  // gold-labeled transcripts with POMS and ORS
  GroundTruth truth;
};

// Deterministic per spec (including its seed). Throws InfeasibleSpec.
SynthOutput generate(const SynthSpec& spec);

// Direct-definition Pearson over the planted series; absent where a series is
// constant or shorter than two.
RealizedCorrelations realized_correlations(const GroundTruth& truth);

std::string ground_truth_to_json(const GroundTruth& truth);

}  // namespace coherelab::synth
