#pragma once

// Emotion labels for client utterances from one of three sources: gold
// annotations, an ingested prediction file, or the built-in multinomial naive
// Bayes baseline.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "coherelab/ingest.hpp"
#include "coherelab/model.hpp"

namespace coherelab::labeling {

inline constexpr std::string_view kTokenizerSpec = "ws-punct-casefold-v1";
inline constexpr std::size_t kDefaultMaxTokens = 128;

// Splits on Unicode whitespace and punctuation, case-folds Latin, Greek and
// Cyrillic letters, and keeps at most `max_tokens` tokens. Invalid UTF-8
// bytes act as separators.
std::vector<std::string> tokenize(std::string_view text, std::size_t max_tokens = SIZE_MAX);

struct BaselineConfig {
  double smoothing = 1.0;
  std::size_t max_tokens = kDefaultMaxTokens;
};

struct BaselineModel {
  std::vector<std::string> vocabulary;  // sorted, unique
  std::array<double, kNumLabels> log_priors{};
  std::array<std::vector<double>, kNumLabels> log_likelihoods;  // [label][token]
  double smoothing = 1.0;
  std::size_t max_tokens = kDefaultMaxTokens;
  std::string tokenizer_spec{kTokenizerSpec};
  // Raw training statistics the probabilities were derived from.
  std::array<std::size_t, kNumLabels> class_documents{};
  std::array<std::size_t, kNumLabels> class_tokens{};
  std::array<std::vector<std::size_t>, kNumLabels> token_counts;

  std::optional<std::size_t> token_index(std::string_view token) const;
};

struct Prediction {
  EmotionLabel label = EmotionLabel::Positive;
  LabelScores scores{};
};

// Client utterances with a gold label are the training examples; everything
// else is ignored. Throws NoTrainingData when none remain.
BaselineModel train_baseline(std::span<const Utterance> examples, const BaselineConfig& config = {});
BaselineModel train_baseline(std::span<const SessionRecord> sessions,
                             const BaselineConfig& config = {});

// Posterior over the four labels. Out-of-vocabulary tokens carry no evidence,
// so text without known tokens scores as the normalized priors.
Prediction predict_baseline(const BaselineModel& model, std::string_view text);

// Seeded random oversampling toward a partial balance: every present minority
// class is topped up by sampling its own instances with replacement until
// count >= ceil(ratio * majority_count). Originals keep their order and are
// followed by the duplicates. Classes absent from the input stay absent.
// Examples must be gold-labeled; 0 < ratio <= 1.
std::vector<Utterance> balance_classes(std::vector<Utterance> examples, double ratio,
                                       std::uint64_t seed);

struct GoldSource {};
struct ExternalPredictionsSource {};
struct BaselineSource {
  BaselineModel model;
};
using LabelerSource = std::variant<GoldSource, ExternalPredictionsSource, BaselineSource>;

std::string_view source_name(const LabelerSource& source);

// Sets predicted_label on every client utterance. Therapist utterances are
// never touched. Throws IncompleteSource (naming the first uncovered
// utterance) before modifying anything.
ingest::CorpusBundle label_corpus(ingest::CorpusBundle bundle, const LabelerSource& source);

// JSON document with fields: format, version, tokenizer, max_tokens,
// smoothing, labels, vocabulary, class_documents, class_tokens,
// token_counts, log_priors, log_likelihoods.
std::string serialize_model(const BaselineModel& model);
BaselineModel parse_model(std::string_view json_text);

}  // namespace coherelab::labeling
