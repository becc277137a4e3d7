#pragma once

// Shared domain vocabulary: labels, utterances, sessions, self-reports and
// the derived per-session quantities consumed by the analysis modules.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coherelab {

// Declaration order is the fixed tie-break order used for every argmax.
enum class EmotionLabel : std::uint8_t { Positive = 0, Negative = 1, Neutral = 2, Mixed = 3 };

inline constexpr std::size_t kNumLabels = 4;
inline constexpr std::array<EmotionLabel, kNumLabels> kAllLabels = {
    EmotionLabel::Positive, EmotionLabel::Negative, EmotionLabel::Neutral, EmotionLabel::Mixed};

constexpr std::size_t index_of(EmotionLabel label) { return static_cast<std::size_t>(label); }

// Lowercase interchange names: "positive", "negative", "neutral", "mixed".
std::string_view to_string(EmotionLabel label);
std::optional<EmotionLabel> parse_label(std::string_view text);

enum class Speaker : std::uint8_t { Client, Therapist };

std::string_view to_string(Speaker speaker);
std::optional<Speaker> parse_speaker(std::string_view text);

enum class Polarity : std::uint8_t { Positive, Negative };

std::string_view to_string(Polarity polarity);

// Per-label probabilities in kAllLabels order.
using LabelScores = std::array<double, kNumLabels>;

// Argmax over scores; exact ties resolve to the earliest label in kAllLabels.
EmotionLabel argmax_label(const LabelScores& scores);

struct Utterance {
  std::string session_id;
  std::size_t utterance_index = 0;
  Speaker speaker = Speaker::Client;
  std::string text;
  std::optional<EmotionLabel> gold_label;
  std::optional<EmotionLabel> predicted_label;
  std::optional<LabelScores> prediction_scores;

  bool operator==(const Utterance&) const = default;
};

struct PomsReport {
  double calmness = 0.0;
  double contentment = 0.0;
  double vigor = 0.0;
  double anger = 0.0;
  double sad = 0.0;
  double anxiety = 0.0;

  std::array<double, 6> values() const { return {calmness, contentment, vigor, anger, sad, anxiety}; }
  bool operator==(const PomsReport&) const = default;
};

inline constexpr std::array<std::string_view, 6> kPomsSubscaleNames = {
    "calmness", "contentment", "vigor", "anger", "sad", "anxiety"};

struct OrsReport {
  std::array<double, 4> scales{};
  double total = 0.0;

  // Builds the report with total = sum of the scales (left to right).
  static OrsReport from_scales(const std::array<double, 4>& scales);
  bool operator==(const OrsReport&) const = default;
};

struct SessionRecord {
  std::string session_id;
  std::string client_id;
  std::size_t session_index = 0;
  std::vector<Utterance> utterances;
  std::optional<PomsReport> poms;
  std::optional<OrsReport> ors;

  bool operator==(const SessionRecord&) const = default;
};

struct EmotionCounts {
  std::array<std::size_t, kNumLabels> counts{};
  std::size_t total_labeled = 0;

  void add(EmotionLabel label) {
    ++counts[index_of(label)];
    ++total_labeled;
  }
  std::size_t operator[](EmotionLabel label) const { return counts[index_of(label)]; }
};

struct EmotionProportions {
  double u_pos = 0.0;
  double u_neg = 0.0;
  double u_neu = 0.0;
  double u_mix = 0.0;

  // Requires counts.total_labeled > 0.
  static EmotionProportions from_counts(const EmotionCounts& counts);
  double of(Polarity polarity) const { return polarity == Polarity::Positive ? u_pos : u_neg; }
};

struct PomsAggregate {
  double p_pos = 0.0;
  double p_neg = 0.0;

  double of(Polarity polarity) const { return polarity == Polarity::Positive ? p_pos : p_neg; }
};

struct CoherenceResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool significant = false;
};

struct AnalysisConfig {
  double alpha = 0.05;
  double poms_subscale_max = 8.0;
  std::size_t min_sessions_per_client = 3;

  // Throws Error(InvalidArgument) when a field is out of range.
  void check() const;
};

struct Violation {
  std::string code;
  std::string message;

  bool operator==(const Violation&) const = default;
};

// Every invariant breach of a single session. Empty means valid.
std::vector<Violation> validate_session(const SessionRecord& record,
                                        const AnalysisConfig& config = {});

// Session checks plus corpus-wide uniqueness of session_id and
// (client_id, session_index).
std::vector<Violation> validate_corpus(const std::vector<SessionRecord>& sessions,
                                       const AnalysisConfig& config = {});

}  // namespace coherelab
