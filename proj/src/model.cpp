#include "coherelab/model.hpp"

#include <cmath>
#include <map>
#include <set>
#include <utility>

#include "coherelab/error.hpp"

namespace coherelab {

std::string_view to_string(EmotionLabel label) {
  switch (label) {
    case EmotionLabel::Positive: return "positive";
    case EmotionLabel::Negative: return "negative";
    case EmotionLabel::Neutral: return "neutral";
    case EmotionLabel::Mixed: return "mixed";
  }
  return "?";
}

std::optional<EmotionLabel> parse_label(std::string_view text) {
  for (EmotionLabel label : kAllLabels) {
    if (text == to_string(label)) return label;
  }
  return std::nullopt;
}

std::string_view to_string(Speaker speaker) {
  return speaker == Speaker::Client ? "client" : "therapist";
}

std::optional<Speaker> parse_speaker(std::string_view text) {
  if (text == "client") return Speaker::Client;
  if (text == "therapist") return Speaker::Therapist;
  return std::nullopt;
}

std::string_view to_string(Polarity polarity) {
  return polarity == Polarity::Positive ? "pos" : "neg";
}

EmotionLabel argmax_label(const LabelScores& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumLabels; ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return kAllLabels[best];
}

OrsReport OrsReport::from_scales(const std::array<double, 4>& scales) {
  OrsReport report;
  report.scales = scales;
  report.total = ((scales[0] + scales[1]) + scales[2]) + scales[3];
  return report;
}

EmotionProportions EmotionProportions::from_counts(const EmotionCounts& counts) {
  if (counts.total_labeled == 0) {
    throw Error(ErrorCode::NoLabeledUtterances, "cannot normalize zero labeled utterances");
  }
  const auto total = static_cast<double>(counts.total_labeled);
  EmotionProportions p;
  p.u_pos = static_cast<double>(counts[EmotionLabel::Positive]) / total;
  p.u_neg = static_cast<double>(counts[EmotionLabel::Negative]) / total;
  p.u_neu = static_cast<double>(counts[EmotionLabel::Neutral]) / total;
  p.u_mix = static_cast<double>(counts[EmotionLabel::Mixed]) / total;
  return p;
}

void AnalysisConfig::check() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must lie strictly between 0 and 1");
  }
  if (!(poms_subscale_max > 0.0) || !std::isfinite(poms_subscale_max)) {
    throw Error(ErrorCode::InvalidArgument, "poms_subscale_max must be positive and finite");
  }
  if (min_sessions_per_client < 3) {
    throw Error(ErrorCode::InvalidArgument, "min_sessions_per_client must be at least 3");
  }
}

namespace {

void add(std::vector<Violation>& out, std::string code, std::string message) {
  out.push_back({std::move(code), std::move(message)});
}

std::string where(const SessionRecord& record, const Utterance& u) {
  return "session " + record.session_id + " utterance " + std::to_string(u.utterance_index);
}

}  // namespace

std::vector<Violation> validate_session(const SessionRecord& record, const AnalysisConfig& config) {
  std::vector<Violation> out;

  if (record.utterances.empty()) {
    add(out, "EMPTY_SESSION", "session " + record.session_id + " has no utterances");
  }

  std::set<std::size_t> indices;
  for (const Utterance& u : record.utterances) {
    if (u.session_id != record.session_id) {
      add(out, "SESSION_ID_MISMATCH",
          where(record, u) + " carries session_id " + u.session_id);
    }
    if (!indices.insert(u.utterance_index).second) {
      add(out, "DUPLICATE_INDEX", where(record, u) + " appears more than once");
    }
    if (u.speaker == Speaker::Therapist) {
      if (u.gold_label || u.predicted_label || u.prediction_scores) {
        add(out, "THERAPIST_LABELED", where(record, u) + " is a therapist turn carrying a label");
      }
    }
    if (u.prediction_scores) {
      const LabelScores& s = *u.prediction_scores;
      double sum = 0.0;
      bool in_range = true;
      for (double v : s) {
        sum += v;
        if (!(v >= 0.0 && v <= 1.0)) in_range = false;
      }
      if (!in_range || std::fabs(sum - 1.0) > 1e-6) {
        add(out, "SCORES_NOT_NORMALIZED", where(record, u) + " scores do not form a distribution");
      }
      if (!u.predicted_label || *u.predicted_label != argmax_label(s)) {
        add(out, "LABEL_NOT_ARGMAX", where(record, u) + " predicted_label is not the score argmax");
      }
    }
  }
  std::size_t expected = 0;
  for (std::size_t idx : indices) {
    if (idx != expected) {
      add(out, "NONCONTIGUOUS_INDEX", "session " + record.session_id +
                                          " utterance indices are not contiguous from 0 (missing " +
                                          std::to_string(expected) + ")");
      break;
    }
    ++expected;
  }

  if (record.poms) {
    const auto values = record.poms->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = values[i];
      if (!std::isfinite(v) || v < 0.0 || v > config.poms_subscale_max) {
        add(out, "POMS_RANGE", "session " + record.session_id + " POMS " +
                                   std::string(kPomsSubscaleNames[i]) + " outside [0, " +
                                   std::to_string(config.poms_subscale_max) + "]");
      }
    }
  }
  if (record.ors) {
    for (std::size_t i = 0; i < 4; ++i) {
      const double v = record.ors->scales[i];
      if (!std::isfinite(v) || v < 0.0 || v > 10.0) {
        add(out, "ORS_RANGE", "session " + record.session_id + " ORS scale " +
                                  std::to_string(i + 1) + " outside [0, 10]");
      }
    }
    const auto& s = record.ors->scales;
    if (std::fabs(record.ors->total - (s[0] + s[1] + s[2] + s[3])) > 1e-9) {
      add(out, "ORS_TOTAL_MISMATCH", "session " + record.session_id + " ORS total != sum of scales");
    }
  }
  return out;
}

std::vector<Violation> validate_corpus(const std::vector<SessionRecord>& sessions,
                                       const AnalysisConfig& config) {
  std::vector<Violation> out;
  std::set<std::string> ids;
  std::set<std::pair<std::string, std::size_t>> keys;
  for (const SessionRecord& s : sessions) {
    if (!ids.insert(s.session_id).second) {
      add(out, "DUPLICATE_SESSION", "session_id " + s.session_id + " appears more than once");
    }
    if (!keys.insert({s.client_id, s.session_index}).second) {
      add(out, "DUPLICATE_CLIENT_SESSION",
          "client " + s.client_id + " has more than one session with index " +
              std::to_string(s.session_index));
    }
    auto per_session = validate_session(s, config);
    out.insert(out.end(), per_session.begin(), per_session.end());
  }
  return out;
}

}  // namespace coherelab
