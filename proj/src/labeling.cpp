#include "coherelab/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "coherelab/error.hpp"
#include "coherelab/random.hpp"

namespace coherelab::labeling {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::optional<std::size_t> BaselineModel::token_index(std::string_view token) const {
  auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), token);
  if (it == vocabulary.end() || *it != token) return std::nullopt;
  return static_cast<std::size_t>(it - vocabulary.begin());
}

namespace {

bool is_training_example(const Utterance& u) {
  return u.speaker == Speaker::Client && u.gold_label.has_value();
}

// Fills the probability fields from the raw counts.
void derive_probabilities(BaselineModel& model) {
  const double alpha = model.smoothing;
  const auto vocab = static_cast<double>(model.vocabulary.size());
  std::size_t documents = 0;
  for (std::size_t c : model.class_documents) documents += c;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    model.log_priors[c] =
        std::log((static_cast<double>(model.class_documents[c]) + alpha) /
                 (static_cast<double>(documents) + alpha * static_cast<double>(kNumLabels)));
    const double denominator = static_cast<double>(model.class_tokens[c]) + alpha * vocab;
    model.log_likelihoods[c].resize(model.vocabulary.size());
    for (std::size_t t = 0; t < model.vocabulary.size(); ++t) {
      model.log_likelihoods[c][t] =
          std::log((static_cast<double>(model.token_counts[c][t]) + alpha) / denominator);
    }
  }
}

void check_config(const BaselineConfig& config) {
  if (!(config.smoothing > 0.0) || !std::isfinite(config.smoothing)) {
    throw Error(ErrorCode::InvalidArgument, "smoothing must be positive");
  }
  if (config.max_tokens == 0) throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
}

}  // namespace

BaselineModel train_baseline(std::span<const Utterance> examples, const BaselineConfig& config) {
  check_config(config);
  std::vector<std::pair<EmotionLabel, std::vector<std::string>>> documents;
  std::map<std::string, std::size_t, std::less<>> vocab;
  for (const Utterance& u : examples) {
    if (!is_training_example(u)) continue;
    auto tokens = tokenize(u.text, config.max_tokens);
    for (const std::string& t : tokens) vocab.emplace(t, 0);
    documents.emplace_back(*u.gold_label, std::move(tokens));
  }
  if (documents.empty()) {
    throw Error(ErrorCode::NoTrainingData, "no gold-labeled client utterances to train on");
  }

  BaselineModel model;
  model.smoothing = config.smoothing;
  model.max_tokens = config.max_tokens;
  model.vocabulary.reserve(vocab.size());
  for (auto& [token, index] : vocab) {
    index = model.vocabulary.size();
    model.vocabulary.push_back(token);
  }
  for (auto& counts : model.token_counts) counts.assign(model.vocabulary.size(), 0);

  for (const auto& [label, tokens] : documents) {
    const std::size_t c = index_of(label);
    ++model.class_documents[c];
    model.class_tokens[c] += tokens.size();
    for (const std::string& t : tokens) ++model.token_counts[c][vocab.find(t)->second];
  }
  derive_probabilities(model);
  return model;
}

BaselineModel train_baseline(std::span<const SessionRecord> sessions, const BaselineConfig& config) {
  std::vector<Utterance> examples;
  for (const SessionRecord& s : sessions) {
    for (const Utterance& u : s.utterances) {
      if (is_training_example(u)) examples.push_back(u);
    }
  }
  return train_baseline(std::span<const Utterance>(examples), config);
}

Prediction predict_baseline(const BaselineModel& model, std::string_view text) {
  std::array<double, kNumLabels> log_posterior = model.log_priors;
  for (const std::string& token : tokenize(text, model.max_tokens)) {
    if (auto t = model.token_index(token)) {
      for (std::size_t c = 0; c < kNumLabels; ++c) log_posterior[c] += model.log_likelihoods[c][*t];
    }
  }
  const double top = *std::max_element(log_posterior.begin(), log_posterior.end());
  Prediction prediction;
  double total = 0.0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    prediction.scores[c] = std::exp(log_posterior[c] - top);
    total += prediction.scores[c];
  }
  for (double& s : prediction.scores) s /= total;
  prediction.label = argmax_label(prediction.scores);
  return prediction;
}

std::vector<Utterance> balance_classes(std::vector<Utterance> examples, double ratio,
                                       std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "balance ratio must lie in (0, 1]");
  }
  if (examples.empty()) throw Error(ErrorCode::EmptyInput, "nothing to balance");

  std::array<std::vector<std::size_t>, kNumLabels> members;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!examples[i].gold_label) {
      throw Error(ErrorCode::InvalidArgument, "balance_classes needs gold-labeled examples");
    }
    members[index_of(*examples[i].gold_label)].push_back(i);
  }
  std::size_t majority = 0;
  for (const auto& m : members) majority = std::max(majority, m.size());
  const auto target = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(majority)));

  Rng rng(seed);
  for (const auto& m : members) {
    if (m.empty()) continue;
    for (std::size_t count = m.size(); count < target; ++count) {
      const std::size_t pick = m[rng.uniform_index(m.size())];
      examples.push_back(examples[pick]);
    }
  }
  return examples;
}

std::string_view source_name(const LabelerSource& source) {
  if (std::holds_alternative<GoldSource>(source)) return "gold";
  if (std::holds_alternative<ExternalPredictionsSource>(source)) return "external";
  return "baseline";
}

ingest::CorpusBundle label_corpus(ingest::CorpusBundle bundle, const LabelerSource& source) {
  auto uncovered = [](const SessionRecord& s, const Utterance& u, const char* what) {
    return Error(ErrorCode::IncompleteSource, "(" + s.session_id + ", " +
                                                  std::to_string(u.utterance_index) + ") has no " +
                                                  what);
  };

  if (std::holds_alternative<GoldSource>(source)) {
    for (const SessionRecord& s : bundle.sessions) {
      for (const Utterance& u : s.utterances) {
        if (u.speaker == Speaker::Client && !u.gold_label) throw uncovered(s, u, "gold_label");
      }
    }
    for (SessionRecord& s : bundle.sessions) {
      for (Utterance& u : s.utterances) {
        if (u.speaker != Speaker::Client) continue;
        u.predicted_label = u.gold_label;
        u.prediction_scores.reset();
      }
    }
  } else if (std::holds_alternative<ExternalPredictionsSource>(source)) {
    for (const SessionRecord& s : bundle.sessions) {
      for (const Utterance& u : s.utterances) {
        if (u.speaker == Speaker::Client && !u.predicted_label) {
          throw uncovered(s, u, "external prediction");
        }
      }
    }
  } else {
    const BaselineModel& model = std::get<BaselineSource>(source).model;
    for (SessionRecord& s : bundle.sessions) {
      for (Utterance& u : s.utterances) {
        if (u.speaker != Speaker::Client) continue;
        const Prediction p = predict_baseline(model, u.text);
        u.predicted_label = p.label;
        u.prediction_scores = p.scores;
      }
    }
  }
  return bundle;
}

std::string serialize_model(const BaselineModel& model) {
  ordered_json doc;
  doc["format"] = "coherelab-baseline-nb";
  doc["version"] = 1;
  doc["tokenizer"] = model.tokenizer_spec;
  doc["max_tokens"] = model.max_tokens;
  doc["smoothing"] = model.smoothing;
  ordered_json labels = ordered_json::array();
  for (EmotionLabel l : kAllLabels) labels.push_back(std::string(to_string(l)));
  doc["labels"] = labels;
  doc["vocabulary"] = model.vocabulary;
  doc["class_documents"] = model.class_documents;
  doc["class_tokens"] = model.class_tokens;
  doc["token_counts"] = model.token_counts;
  doc["log_priors"] = model.log_priors;
  doc["log_likelihoods"] = model.log_likelihoods;
  return doc.dump(1) + "\n";
}

BaselineModel parse_model(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine, std::string("baseline model: ") + e.what());
  }
  auto fail = [](const std::string& what) {
    return Error(ErrorCode::SchemaViolation, "baseline model: " + what);
  };
  try {
    if (doc.at("format") != "coherelab-baseline-nb" || doc.at("version") != 1) {
      throw fail("unsupported format or version");
    }
    BaselineModel model;
    model.tokenizer_spec = doc.at("tokenizer").get<std::string>();
    if (model.tokenizer_spec != kTokenizerSpec) throw fail("unknown tokenizer " + model.tokenizer_spec);
    model.max_tokens = doc.at("max_tokens").get<std::size_t>();
    model.smoothing = doc.at("smoothing").get<double>();
    check_config({model.smoothing, model.max_tokens});
    model.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
    if (!std::is_sorted(model.vocabulary.begin(), model.vocabulary.end()) ||
        std::adjacent_find(model.vocabulary.begin(), model.vocabulary.end()) != model.vocabulary.end()) {
      throw fail("vocabulary must be sorted and unique");
    }
    model.class_documents = doc.at("class_documents").get<std::array<std::size_t, kNumLabels>>();
    model.class_tokens = doc.at("class_tokens").get<std::array<std::size_t, kNumLabels>>();
    model.token_counts = doc.at("token_counts").get<std::array<std::vector<std::size_t>, kNumLabels>>();
    model.log_priors = doc.at("log_priors").get<std::array<double, kNumLabels>>();
    model.log_likelihoods = doc.at("log_likelihoods").get<std::array<std::vector<double>, kNumLabels>>();
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      if (model.token_counts[c].size() != model.vocabulary.size() ||
          model.log_likelihoods[c].size() != model.vocabulary.size()) {
        throw fail("per-class arrays must match the vocabulary size");
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
}

}  // namespace coherelab::labeling
