#include "coherelab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "coherelab/error.hpp"
#include "coherelab/ingest.hpp"
#include "coherelab/io.hpp"
#include "coherelab/labeling.hpp"
#include "coherelab/random.hpp"
#include "coherelab/stats.hpp"

namespace coherelab::eval {

FoldPlan make_folds(std::vector<std::string> session_ids, std::size_t k, double dev_fraction,
                    std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::TooFewSessions, "k must be at least 2");
  std::sort(session_ids.begin(), session_ids.end());
  if (std::adjacent_find(session_ids.begin(), session_ids.end()) != session_ids.end()) {
    throw Error(ErrorCode::InvalidArgument, "session ids must be unique");
  }
  if (session_ids.size() < k) {
    throw Error(ErrorCode::TooFewSessions, std::to_string(session_ids.size()) +
                                               " sessions cannot fill " + std::to_string(k) +
                                               " folds");
  }
  if (!(dev_fraction >= 0.0 && dev_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "dev_fraction must lie in [0, 1)");
  }
  const std::size_t n = session_ids.size();
  const auto dev_size = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n)));

  Rng rng(seed);
  rng.shuffle(session_ids);

  FoldPlan plan;
  plan.k = k;
  plan.dev_fraction = dev_fraction;
  plan.seed = seed;
  plan.folds.resize(k);
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    Fold& fold = plan.folds[f];
    fold.test.assign(session_ids.begin() + static_cast<std::ptrdiff_t>(cursor),
                     session_ids.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    std::vector<std::string> rest;
    rest.insert(rest.end(), session_ids.begin(), session_ids.begin() + static_cast<std::ptrdiff_t>(cursor));
    rest.insert(rest.end(), session_ids.begin() + static_cast<std::ptrdiff_t>(cursor + size), session_ids.end());
    cursor += size;

    if (dev_size >= rest.size()) {
      throw Error(ErrorCode::TooFewSessions,
                  "fold " + std::to_string(f) + " leaves no training sessions after the dev split");
    }
    Rng dev_rng(mix_seed(seed, f));
    dev_rng.shuffle(rest);
    fold.dev.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(dev_size));
    fold.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(dev_size), rest.end());
    std::sort(fold.test.begin(), fold.test.end());
    std::sort(fold.dev.begin(), fold.dev.end());
    std::sort(fold.train.begin(), fold.train.end());
  }
  return plan;
}

std::vector<std::string> check_fold_plan(const FoldPlan& plan, std::vector<std::string> session_ids) {
  std::vector<std::string> problems;
  const std::set<std::string> all(session_ids.begin(), session_ids.end());
  std::map<std::string, std::size_t> test_count;
  const auto dev_size =
      static_cast<std::size_t>(std::llround(plan.dev_fraction * static_cast<double>(all.size())));
  if (plan.folds.size() != plan.k) problems.push_back("fold count differs from k");

  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const Fold& fold = plan.folds[f];
    const std::string tag = "fold " + std::to_string(f) + ": ";
    const std::set<std::string> test(fold.test.begin(), fold.test.end());
    const std::set<std::string> dev(fold.dev.begin(), fold.dev.end());
    const std::set<std::string> train(fold.train.begin(), fold.train.end());
    for (const auto& id : fold.test) ++test_count[id];
    for (const auto& id : test) {
      if (train.contains(id)) problems.push_back(tag + "test session " + id + " in train");
      if (dev.contains(id)) problems.push_back(tag + "test session " + id + " in dev");
    }
    for (const auto& id : dev) {
      if (train.contains(id)) problems.push_back(tag + "dev session " + id + " in train");
    }
    if (test.size() + dev.size() + train.size() != all.size()) {
      problems.push_back(tag + "train/dev/test do not cover the sessions exactly once");
    }
    if (dev.size() != dev_size) problems.push_back(tag + "dev size " + std::to_string(dev.size()));
    for (const auto* part : {&fold.test, &fold.dev, &fold.train}) {
      for (const auto& id : *part) {
        if (!all.contains(id)) problems.push_back(tag + "unknown session " + id);
      }
    }
  }
  for (const auto& id : all) {
    if (test_count[id] != 1) {
      problems.push_back("session " + id + " is a test session in " +
                         std::to_string(test_count[id]) + " folds");
    }
  }
  return problems;
}

double micro_f1(std::span<const LabelPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "micro-F1 of no predictions");
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (EmotionLabel label : kAllLabels) {
    for (const auto& [gold, predicted] : pairs) {
      if (predicted == label && gold == label) ++tp;
      if (predicted == label && gold != label) ++fp;
      if (predicted != label && gold == label) ++fn;
    }
  }
  return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
}

ConfusionMatrix confusion_matrix(std::span<const LabelPair> pairs) {
  ConfusionMatrix m{};
  for (const auto& [gold, predicted] : pairs) ++m[index_of(gold)][index_of(predicted)];
  return m;
}

namespace {

std::vector<EmotionLabel> gold_of_clients(std::span<const SessionRecord> sessions) {
  std::vector<EmotionLabel> out;
  for (const SessionRecord& s : sessions) {
    for (const Utterance& u : s.utterances) {
      if (u.speaker == Speaker::Client) out.push_back(*u.gold_label);
    }
  }
  return out;
}

std::vector<SessionRecord> without_labels(std::vector<SessionRecord> sessions) {
  for (SessionRecord& s : sessions) {
    for (Utterance& u : s.utterances) {
      u.gold_label.reset();
      u.predicted_label.reset();
      u.prediction_scores.reset();
    }
  }
  return sessions;
}

class BaselineLabeler final : public Labeler {
 public:
  explicit BaselineLabeler(labeling::BaselineModel model) : model_(std::move(model)) {}

  std::vector<EmotionLabel> predict(std::span<const SessionRecord> sessions) const override {
    std::vector<EmotionLabel> out;
    for (const SessionRecord& s : sessions) {
      for (const Utterance& u : s.utterances) {
        if (u.speaker == Speaker::Client) out.push_back(labeling::predict_baseline(model_, u.text).label);
      }
    }
    return out;
  }

  std::string describe() const override { return "smoothing=" + io::format_double(model_.smoothing); }

 private:
  labeling::BaselineModel model_;
};

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

std::string substitute(std::string command, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string placeholder = "{" + key + "}";
    const std::string quoted = shell_quote(value);
    for (std::size_t pos = command.find(placeholder); pos != std::string::npos;
         pos = command.find(placeholder, pos + quoted.size())) {
      command.replace(pos, placeholder.size(), quoted);
    }
  }
  return command;
}

void run_command(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status != 0) {
    throw Error(ErrorCode::ExternalCommandFailed,
                "command exited with status " + std::to_string(status) + ": " + command);
  }
}

class ExternalLabeler final : public Labeler {
 public:
  ExternalLabeler(std::string predict_command, std::filesystem::path fold_dir)
      : predict_command_(std::move(predict_command)), fold_dir_(std::move(fold_dir)) {}

  std::vector<EmotionLabel> predict(std::span<const SessionRecord> sessions) const override {
    const std::vector<SessionRecord> unlabeled =
        without_labels(std::vector<SessionRecord>(sessions.begin(), sessions.end()));
    const auto transcripts = fold_dir_ / "test.jsonl";
    const auto out = fold_dir_ / "predictions.jsonl";
    io::write_text_file(transcripts, ingest::write_transcripts(unlabeled));
    std::filesystem::remove(out);
    run_command(substitute(predict_command_, {{"model", (fold_dir_ / "model").string()},
                                              {"transcripts", transcripts.string()},
                                              {"out", out.string()}}));
    ingest::CorpusBundle bundle;
    bundle.sessions = unlabeled;
    bundle = ingest::load_predictions(out, std::move(bundle));
    std::vector<EmotionLabel> labels;
    for (const SessionRecord& s : bundle.sessions) {
      for (const Utterance& u : s.utterances) {
        if (u.speaker != Speaker::Client) continue;
        if (!u.predicted_label) {
          throw Error(ErrorCode::IncompleteSource, "external predictor skipped (" + s.session_id +
                                                       ", " + std::to_string(u.utterance_index) + ")");
        }
        labels.push_back(*u.predicted_label);
      }
    }
    return labels;
  }

  std::string describe() const override { return "external"; }

 private:
  std::string predict_command_;
  std::filesystem::path fold_dir_;
};

}  // namespace

BaselineFactory::BaselineFactory(std::vector<double> smoothing_grid, std::size_t max_tokens)
    : grid_(std::move(smoothing_grid)), max_tokens_(max_tokens) {
  if (grid_.empty()) throw Error(ErrorCode::InvalidArgument, "smoothing grid is empty");
}

std::unique_ptr<Labeler> BaselineFactory::train(const TrainingSplit& split) const {
  const std::span<const Utterance> examples(split.train_examples);
  const std::vector<EmotionLabel> dev_gold = gold_of_clients(split.dev_sessions);
  if (dev_gold.empty()) {
    return std::make_unique<BaselineLabeler>(labeling::train_baseline(examples, {1.0, max_tokens_}));
  }
  const std::vector<SessionRecord> dev_inputs = without_labels(split.dev_sessions);
  std::unique_ptr<BaselineLabeler> best;
  double best_f1 = -1.0;
  for (double smoothing : grid_) {
    auto candidate = std::make_unique<BaselineLabeler>(
        labeling::train_baseline(examples, {smoothing, max_tokens_}));
    const std::vector<EmotionLabel> predicted = candidate->predict(dev_inputs);
    std::vector<LabelPair> pairs;
    for (std::size_t i = 0; i < predicted.size(); ++i) pairs.emplace_back(dev_gold[i], predicted[i]);
    const double f1 = micro_f1(pairs);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = std::move(candidate);
    }
  }
  return best;
}

ExternalCommandFactory::ExternalCommandFactory(std::string train_command, std::string predict_command,
                                               std::filesystem::path work_dir)
    : train_command_(std::move(train_command)),
      predict_command_(std::move(predict_command)),
      work_dir_(std::move(work_dir)) {}

std::unique_ptr<Labeler> ExternalCommandFactory::train(const TrainingSplit& split) const {
  const auto fold_dir = work_dir_ / ("fold-" + std::to_string(split.fold));
  std::filesystem::create_directories(fold_dir / "model");

  // Balancing duplicates are appended to their source session with fresh indices.
  std::vector<SessionRecord> train = split.train_sessions;
  std::map<std::string, SessionRecord*> by_id;
  for (SessionRecord& s : train) by_id[s.session_id] = &s;
  for (std::size_t i = split.original_examples; i < split.train_examples.size(); ++i) {
    Utterance dup = split.train_examples[i];
    SessionRecord* s = by_id.at(dup.session_id);
    dup.utterance_index = s->utterances.size();
    s->utterances.push_back(std::move(dup));
  }
  const auto train_path = fold_dir / "train.jsonl";
  const auto dev_path = fold_dir / "dev.jsonl";
  io::write_text_file(train_path, ingest::write_transcripts(train));
  io::write_text_file(dev_path, ingest::write_transcripts(split.dev_sessions));
  run_command(substitute(train_command_, {{"train", train_path.string()},
                                          {"dev", dev_path.string()},
                                          {"model", (fold_dir / "model").string()}}));
  return std::make_unique<ExternalLabeler>(predict_command_, fold_dir);
}

EvalReport run_cv(std::span<const SessionRecord> gold_sessions, const LabelerFactory& factory,
                  const FoldPlan& plan, const CvOptions& options) {
  std::map<std::string, const SessionRecord*> by_id;
  for (const SessionRecord& s : gold_sessions) {
    for (const Utterance& u : s.utterances) {
      if (u.speaker == Speaker::Client && !u.gold_label) {
        throw Error(ErrorCode::IncompleteSource, "(" + s.session_id + ", " +
                                                     std::to_string(u.utterance_index) +
                                                     ") has no gold_label");
      }
    }
    by_id[s.session_id] = &s;
  }
  auto gather = [&](const std::vector<std::string>& ids) {
    std::vector<SessionRecord> out;
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw Error(ErrorCode::UnknownSession, "fold plan names " + id);
      out.push_back(*it->second);
    }
    return out;
  };

  auto run_fold = [&](std::size_t f) -> FoldResult {
    try {
      const Fold& fold = plan.folds[f];
      TrainingSplit split;
      split.fold = f;
      split.seed = mix_seed(options.seed, f);
      split.train_sessions = gather(fold.train);
      split.dev_sessions = gather(fold.dev);
      for (const SessionRecord& s : split.train_sessions) {
        for (const Utterance& u : s.utterances) {
          if (u.speaker == Speaker::Client) split.train_examples.push_back(u);
        }
      }
      if (split.train_examples.empty()) {
        throw Error(ErrorCode::NoTrainingData, "training split has no client utterances");
      }
      split.original_examples = split.train_examples.size();
      split.train_examples =
          labeling::balance_classes(std::move(split.train_examples), options.balance_ratio, split.seed);

      const std::vector<SessionRecord> test = gather(fold.test);
      const std::unique_ptr<Labeler> labeler = factory.train(split);
      const std::vector<EmotionLabel> predicted = labeler->predict(without_labels(test));
      const std::vector<EmotionLabel> gold = gold_of_clients(test);
      if (predicted.size() != gold.size()) {
        throw Error(ErrorCode::IncompleteSource, "labeler returned " + std::to_string(predicted.size()) +
                                                     " labels for " + std::to_string(gold.size()) +
                                                     " utterances");
      }
      std::vector<LabelPair> pairs;
      for (std::size_t i = 0; i < gold.size(); ++i) pairs.emplace_back(gold[i], predicted[i]);

      FoldResult result;
      result.fold = f;
      result.train_sessions = split.train_sessions.size();
      result.dev_sessions = split.dev_sessions.size();
      result.test_sessions = test.size();
      result.test_utterances = pairs.size();
      result.train_examples = split.train_examples.size();
      result.micro_f1 = micro_f1(pairs);
      result.selected = labeler->describe();
      result.confusion = confusion_matrix(pairs);
      return result;
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.what());
    }
  };

  EvalReport report;
  report.labeler = factory.name();
  report.k = plan.k;
  report.dev_fraction = plan.dev_fraction;
  report.balance_ratio = options.balance_ratio;
  report.seed = options.seed;

  if (options.parallel && factory.concurrent()) {
    std::vector<std::future<FoldResult>> pending;
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
      pending.push_back(std::async(std::launch::async, run_fold, f));
    }
    // Drain every future before rethrowing so the lowest failing fold is reported.
    std::optional<Error> first_error;
    for (auto& p : pending) {
      try {
        report.folds.push_back(p.get());
      } catch (const Error& e) {
        if (!first_error) first_error = e;
      }
    }
    if (first_error) throw *first_error;
  } else {
    for (std::size_t f = 0; f < plan.folds.size(); ++f) report.folds.push_back(run_fold(f));
  }

  std::vector<double> scores;
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const FoldResult& r : report.folds) {
    scores.push_back(r.micro_f1);
    for (std::size_t g = 0; g < kNumLabels; ++g) {
      for (std::size_t p = 0; p < kNumLabels; ++p) {
        report.confusion[g][p] += r.confusion[g][p];
        total += r.confusion[g][p];
        if (g == p) correct += r.confusion[g][p];
      }
    }
  }
  report.mean_micro_f1 = stats::mean(scores);
  double ss = 0.0;
  for (double s : scores) ss += (s - report.mean_micro_f1) * (s - report.mean_micro_f1);
  report.sd_micro_f1 = scores.size() > 1 ? std::sqrt(ss / static_cast<double>(scores.size() - 1)) : 0.0;
  report.pooled_micro_f1 = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["labeler"] = report.labeler;
  doc["k"] = report.k;
  doc["dev_fraction"] = report.dev_fraction;
  doc["balance_ratio"] = report.balance_ratio;
  doc["seed"] = report.seed;
  doc["headline"] = "mean_micro_f1";
  doc["mean_micro_f1"] = report.mean_micro_f1;
  doc["sd_micro_f1"] = report.sd_micro_f1;
  doc["pooled_micro_f1"] = report.pooled_micro_f1;
  nlohmann::ordered_json labels = nlohmann::ordered_json::array();
  for (EmotionLabel l : kAllLabels) labels.push_back(std::string(to_string(l)));
  doc["labels"] = labels;
  doc["confusion"] = report.confusion;
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const FoldResult& r : report.folds) {
    nlohmann::ordered_json f;
    f["fold"] = r.fold;
    f["train_sessions"] = r.train_sessions;
    f["dev_sessions"] = r.dev_sessions;
    f["test_sessions"] = r.test_sessions;
    f["train_examples"] = r.train_examples;
    f["test_utterances"] = r.test_utterances;
    f["micro_f1"] = r.micro_f1;
    f["selected"] = r.selected;
    f["confusion"] = r.confusion;
    folds.push_back(f);
  }
  doc["folds"] = folds;
  doc["note"] = "micro-F1 equals accuracy for single-label prediction; pooled_micro_f1 scores all "
                "test utterances together, mean_micro_f1 averages the folds";
  return doc.dump(2) + "\n";
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream out;
  char line[256];
  out << "Cross-validated emotion recognition (" << report.labeler << ", k=" << report.k
      << ", seed=" << report.seed << ", balance=" << io::format_double(report.balance_ratio) << ")\n\n";
  out << "fold  train  dev  test  utterances  micro-F1  selected\n";
  for (const FoldResult& r : report.folds) {
    std::snprintf(line, sizeof line, "%4zu  %5zu  %3zu  %4zu  %10zu  %8.4f  %s\n", r.fold,
                  r.train_sessions, r.dev_sessions, r.test_sessions, r.test_utterances, r.micro_f1,
                  r.selected.c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "\nmicro-F1 mean %.4f (sd %.4f), pooled %.4f\n\n",
                report.mean_micro_f1, report.sd_micro_f1, report.pooled_micro_f1);
  out << line;
  out << "confusion (rows gold, columns predicted)\n";
  out << "            positive  negative   neutral     mixed\n";
  for (EmotionLabel g : kAllLabels) {
    std::snprintf(line, sizeof line, "%-10s", std::string(to_string(g)).c_str());
    out << line;
    for (EmotionLabel p : kAllLabels) {
      std::snprintf(line, sizeof line, "%10zu", report.confusion[index_of(g)][index_of(p)]);
      out << line;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace coherelab::eval
