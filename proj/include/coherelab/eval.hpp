#pragma once

// k-fold cross-validation over gold-labeled sessions: session-level folds with
// a dev split drawn from the training side, partial class balancing of the
// training split, micro-F1 scoring and a pooled confusion matrix.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coherelab/model.hpp"

namespace coherelab::eval {

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;
};

struct FoldPlan {
  std::size_t k = 10;
  double dev_fraction = 0.10;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
};

// Sessions are sorted before the seeded shuffle, so the plan does not depend
// on input order. Test folds differ in size by at most one. Each fold's dev
// set holds round(dev_fraction * |sessions|) sessions from its training side.
// Throws TooFewSessions when k < 2 or |sessions| < k.
FoldPlan make_folds(std::vector<std::string> session_ids, std::size_t k = 10,
                    double dev_fraction = 0.10, std::uint64_t seed = 0);

// Structural problems of a plan over `session_ids` (partition, leakage, dev
// sizing). Empty means sound.
std::vector<std::string> check_fold_plan(const FoldPlan& plan,
                                         std::vector<std::string> session_ids);

using LabelPair = std::pair<EmotionLabel, EmotionLabel>;  // (gold, predicted)
using ConfusionMatrix = std::array<std::array<std::size_t, kNumLabels>, kNumLabels>;  // [gold][pred]

// Micro-averaged F1 over the four labels. For single-label prediction every
// miss is one false positive and one false negative, so this equals accuracy.
double micro_f1(std::span<const LabelPair> pairs);

ConfusionMatrix confusion_matrix(std::span<const LabelPair> pairs);

// Everything a trainer sees for one fold.
struct TrainingSplit {
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  std::vector<SessionRecord> train_sessions;
  std::vector<SessionRecord> dev_sessions;
  // Gold client utterances of train_sessions followed by balancing duplicates.
  std::vector<Utterance> train_examples;
  std::size_t original_examples = 0;
};

class Labeler {
 public:
  virtual ~Labeler() = default;
  // One label per client utterance, sessions in order, utterances in order.
  // Input sessions carry no gold labels.
  virtual std::vector<EmotionLabel> predict(std::span<const SessionRecord> sessions) const = 0;
  // Short description of the fitted configuration, e.g. "smoothing=0.5".
  virtual std::string describe() const = 0;
};

class LabelerFactory {
 public:
  virtual ~LabelerFactory() = default;
  virtual std::unique_ptr<Labeler> train(const TrainingSplit& split) const = 0;
  virtual std::string name() const = 0;
  // Whether train() and the returned labelers may run on several folds at once.
  virtual bool concurrent() const { return true; }
};

// Naive Bayes baseline; picks smoothing on the dev sessions by micro-F1
// (first grid value wins ties; 1.0 when the dev set is empty).
class BaselineFactory final : public LabelerFactory {
 public:
  explicit BaselineFactory(std::vector<double> smoothing_grid = {0.1, 0.5, 1.0, 2.0},
                           std::size_t max_tokens = 128);

  std::unique_ptr<Labeler> train(const TrainingSplit& split) const override;
  std::string name() const override { return "baseline"; }

 private:
  std::vector<double> grid_;
  std::size_t max_tokens_;
};

// Delegates training and prediction to external commands that speak the
// interchange formats. Placeholders substituted (shell-quoted):
//   train_command:   {train} {dev} {model}
//   predict_command: {model} {transcripts} {out}
// {train}/{dev}/{transcripts} are transcripts.jsonl files; {out} must be
// written as predictions.jsonl. Test transcripts are written without gold.
class ExternalCommandFactory final : public LabelerFactory {
 public:
  ExternalCommandFactory(std::string train_command, std::string predict_command,
                         std::filesystem::path work_dir);

  std::unique_ptr<Labeler> train(const TrainingSplit& split) const override;
  std::string name() const override { return "external"; }
  bool concurrent() const override { return false; }

 private:
  std::string train_command_;
  std::string predict_command_;
  std::filesystem::path work_dir_;
};

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_sessions = 0;
  std::size_t dev_sessions = 0;
  std::size_t test_sessions = 0;
  std::size_t test_utterances = 0;
  std::size_t train_examples = 0;  // after balancing
  double micro_f1 = 0.0;
  std::string selected;
  ConfusionMatrix confusion{};
};

struct EvalReport {
  std::string labeler;
  std::size_t k = 0;
  double dev_fraction = 0.0;
  double balance_ratio = 0.0;
  std::uint64_t seed = 0;
  std::vector<FoldResult> folds;  // by fold index
  double mean_micro_f1 = 0.0;     // headline
  double sd_micro_f1 = 0.0;       // sample standard deviation over folds
  double pooled_micro_f1 = 0.0;
  ConfusionMatrix confusion{};
};

struct CvOptions {
  double balance_ratio = 0.5;
  std::uint64_t seed = 0;
  bool parallel = true;
};

// Every client utterance of every session must carry gold_label. A failing
// fold aborts the run; the error keeps its code and names the fold.
EvalReport run_cv(std::span<const SessionRecord> gold_sessions, const LabelerFactory& factory,
                  const FoldPlan& plan, const CvOptions& options = {});

// JSON fields: labeler, k, dev_fraction, balance_ratio, seed, headline,
// mean_micro_f1, sd_micro_f1, pooled_micro_f1, labels, confusion (rows gold,
// columns predicted), folds[], note.
std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace coherelab::eval
