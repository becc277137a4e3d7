#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <random>
#include <set>

#include "coherelab/error.hpp"
#include "coherelab/eval.hpp"
#include "coherelab/io.hpp"
#include "coherelab/random.hpp"
#include "coherelab/synth.hpp"
#include "support.hpp"

using namespace coherelab;
using namespace coherelab::eval;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("s" + std::to_string(1000 + i));
  return out;
}

std::vector<SessionRecord> separable(std::uint64_t seed, std::size_t clients = 5) {
  synth::SynthSpec spec;
  spec.n_clients = clients;
  spec.sessions_per_client = 6;
  spec.seed = seed;
  return synth::generate(spec).bundle.sessions;
}

// Gold labels permuted across all client utterances; text no longer predicts labels.
std::vector<SessionRecord> shuffled(std::uint64_t seed) {
  synth::SynthSpec spec;
  spec.n_clients = 6;
  spec.sessions_per_client = 5;
  spec.label_skew = {0.25, 0.25, 0.25, 0.25};
  spec.seed = seed;
  auto sessions = synth::generate(spec).bundle.sessions;
  std::vector<EmotionLabel> labels;
  for (const auto& s : sessions) {
    for (const auto& u : s.utterances) {
      if (u.gold_label) labels.push_back(*u.gold_label);
    }
  }
  Rng rng(seed + 1000);
  rng.shuffle(labels);
  std::size_t k = 0;
  for (auto& s : sessions) {
    for (auto& u : s.utterances) {
      if (u.gold_label) u.gold_label = labels[k++];
    }
  }
  return sessions;
}

std::vector<std::string> session_ids(const std::vector<SessionRecord>& sessions) {
  std::vector<std::string> out;
  for (const auto& s : sessions) out.push_back(s.session_id);
  return out;
}

class FailingFactory final : public LabelerFactory {
 public:
  std::unique_ptr<Labeler> train(const TrainingSplit& split) const override {
    if (split.fold == 3 || split.fold == 6) throw Error(ErrorCode::NoTrainingData, "boom");
    return BaselineFactory().train(split);
  }
  std::string name() const override { return "failing"; }
};

}  // namespace

TEST(Folds, TwentySessionsTenFolds) {
  const auto plan = make_folds(ids(20), 10, 0.1, 1);
  ASSERT_EQ(plan.folds.size(), 10u);
  for (const auto& f : plan.folds) {
    EXPECT_EQ(f.test.size(), 2u);
    EXPECT_EQ(f.dev.size(), 2u);
    EXPECT_EQ(f.train.size(), 16u);
  }
  EXPECT_TRUE(check_fold_plan(plan, ids(20)).empty());
}

TEST(Folds, TooFewSessions) {
  for (auto [n, k] : {std::pair<std::size_t, std::size_t>{5, 10}, {20, 1}, {20, 0}}) {
    try {
      make_folds(ids(n), k);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::TooFewSessions);
    }
  }
}

TEST(Folds, SeedDeterminism) {
  const auto a = make_folds(ids(37), 5, 0.1, 7);
  const auto b = make_folds(ids(37), 5, 0.1, 7);
  const auto c = make_folds(ids(37), 5, 0.1, 8);
  bool differs = false;
  for (std::size_t f = 0; f < 5; ++f) {
    EXPECT_EQ(a.folds[f].test, b.folds[f].test);
    EXPECT_EQ(a.folds[f].dev, b.folds[f].dev);
    EXPECT_EQ(a.folds[f].test.size(), c.folds[f].test.size());
    EXPECT_EQ(a.folds[f].dev.size(), c.folds[f].dev.size());
    differs = differs || a.folds[f].test != c.folds[f].test;
  }
  EXPECT_TRUE(differs);
}

TEST(Folds, InputOrderIrrelevant) {
  auto shuffled_ids = ids(23);
  std::reverse(shuffled_ids.begin(), shuffled_ids.end());
  const auto a = make_folds(ids(23), 4, 0.2, 3);
  const auto b = make_folds(shuffled_ids, 4, 0.2, 3);
  for (std::size_t f = 0; f < 4; ++f) EXPECT_EQ(a.folds[f].test, b.folds[f].test);
}

TEST(Folds, NoLeakageOnFuzzedPlans) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + gen() % 12;
    const std::size_t n = k + gen() % 200;
    const double dev = static_cast<double>(gen() % 30) / 100.0;
    FoldPlan plan;
    try {
      plan = make_folds(ids(n), k, dev, gen());
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::TooFewSessions);
      continue;
    }
    EXPECT_TRUE(check_fold_plan(plan, ids(n)).empty());
    std::size_t min_test = n, max_test = 0;
    for (const auto& f : plan.folds) {
      const std::set<std::string> test(f.test.begin(), f.test.end());
      for (const auto& s : f.train) EXPECT_FALSE(test.contains(s));
      for (const auto& s : f.dev) EXPECT_FALSE(test.contains(s));
      min_test = std::min(min_test, f.test.size());
      max_test = std::max(max_test, f.test.size());
    }
    EXPECT_LE(max_test - min_test, 1u);
  }
}

TEST(Folds, CheckerFindsLeak) {
  auto plan = make_folds(ids(10), 5, 0.0, 1);
  plan.folds[0].train.push_back(plan.folds[0].test[0]);
  EXPECT_FALSE(check_fold_plan(plan, ids(10)).empty());
}

TEST(MicroF1, Examples) {
  using L = EmotionLabel;
  const std::vector<LabelPair> all{{L::Positive, L::Positive}, {L::Mixed, L::Mixed}};
  const std::vector<LabelPair> none{{L::Positive, L::Negative}, {L::Mixed, L::Neutral}};
  const std::vector<LabelPair> three{{L::Positive, L::Positive}, {L::Negative, L::Negative},
                                     {L::Neutral, L::Neutral}, {L::Mixed, L::Positive}};
  EXPECT_EQ(micro_f1(all), 1.0);
  EXPECT_EQ(micro_f1(none), 0.0);
  EXPECT_EQ(micro_f1(three), 0.75);
  const auto cm = confusion_matrix(three);
  EXPECT_EQ(cm[3][0], 1u);
  EXPECT_EQ(cm[0][0], 1u);
}

TEST(MicroF1, EqualsAccuracyExactly) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<LabelPair> pairs(1 + gen() % 300);
    std::size_t hits = 0;
    for (auto& p : pairs) {
      p = {kAllLabels[gen() % 4], kAllLabels[gen() % 4]};
      hits += p.first == p.second;
    }
    ASSERT_EQ(micro_f1(pairs), static_cast<double>(hits) / static_cast<double>(pairs.size()));
  }
}

TEST(RunCv, SeparableCorpusIsPerfect) {
  const auto sessions = separable(4);
  const auto report = run_cv(sessions, BaselineFactory(), make_folds(session_ids(sessions), 10, 0.1, 4));
  EXPECT_EQ(report.mean_micro_f1, 1.0);
  EXPECT_EQ(report.pooled_micro_f1, 1.0);
  EXPECT_EQ(report.folds.size(), 10u);
  EXPECT_EQ(report.sd_micro_f1, 0.0);
}

TEST(RunCv, ShuffledLabelsNearChance) {
  double total = 0.0;
  const int runs = 10;
  for (int seed = 1; seed <= runs; ++seed) {
    const auto sessions = shuffled(static_cast<std::uint64_t>(seed));
    CvOptions opt;
    opt.seed = static_cast<std::uint64_t>(seed);
    total += run_cv(sessions, BaselineFactory(), make_folds(session_ids(sessions), 10, 0.1, seed), opt).mean_micro_f1;
  }
  EXPECT_NEAR(total / runs, 0.25, 0.05);
}

TEST(RunCv, ParallelMatchesSequential) {
  const auto sessions = shuffled(3);
  const auto plan = make_folds(session_ids(sessions), 5, 0.2, 3);
  CvOptions par;
  CvOptions seq;
  seq.parallel = false;
  EXPECT_EQ(report_to_json(run_cv(sessions, BaselineFactory(), plan, par)),
            report_to_json(run_cv(sessions, BaselineFactory(), plan, seq)));
}

TEST(RunCv, FailingFoldKeepsCodeAndNamesLowestFold) {
  const auto sessions = separable(2);
  try {
    run_cv(sessions, FailingFactory(), make_folds(session_ids(sessions), 10, 0.1, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoTrainingData);
    EXPECT_NE(std::string(e.what()).find("fold 3"), std::string::npos) << e.what();
  }
}

TEST(RunCv, RequiresGold) {
  auto sessions = separable(2);
  sessions[4].utterances[1].gold_label.reset();
  try {
    run_cv(sessions, BaselineFactory(), make_folds(session_ids(sessions), 10, 0.1, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompleteSource);
  }
}

TEST(RunCv, BalancingGrowsTrainingSet) {
  synth::SynthSpec spec;
  spec.n_clients = 4;
  spec.sessions_per_client = 5;
  spec.label_skew = {0.7, 0.1, 0.15, 0.05};
  spec.r_pos = 0;
  spec.r_neg = 0;
  const auto sessions = synth::generate(spec).bundle.sessions;
  const auto plan = make_folds(session_ids(sessions), 4, 0.1, 1);
  CvOptions light;
  light.balance_ratio = 0.1;
  CvOptions full;
  full.balance_ratio = 1.0;
  const auto a = run_cv(sessions, BaselineFactory(), plan, light);
  const auto b = run_cv(sessions, BaselineFactory(), plan, full);
  for (std::size_t f = 0; f < 4; ++f) EXPECT_GT(b.folds[f].train_examples, a.folds[f].train_examples);
}

TEST(RunCv, ReportJsonShape) {
  const auto sessions = separable(5, 3);
  const auto json = report_to_json(run_cv(sessions, BaselineFactory(), make_folds(session_ids(sessions), 3, 0.1, 1)));
  for (const char* key : {"\"labeler\"", "\"mean_micro_f1\"", "\"pooled_micro_f1\"", "\"confusion\"", "\"folds\""}) {
    EXPECT_NE(json.find(key), std::string::npos) << key;
  }
}

TEST(ExternalCommand, FakePredictorRoundTrip) {
  if (std::system("python3 -c pass >/dev/null 2>&1") != 0) GTEST_SKIP() << "python3 unavailable";
  const auto dir = coherelab::testing::scratch_dir("external");
  // Predicts the label named by each token's vocabulary prefix.
  io::write_text_file(dir / "fake.py", R"(import json, os, sys
mode = sys.argv[1]
if mode == "train":
    train, dev, model = sys.argv[2:5]
    for line in open(train):
        json.loads(line)
    open(os.path.join(model, "ok"), "w").write("1")
else:
    model, transcripts, out = sys.argv[2:5]
    assert os.path.exists(os.path.join(model, "ok"))
    names = {"pos": "positive", "neg": "negative", "neu": "neutral", "mix": "mixed"}
    with open(out, "w") as f:
        for line in open(transcripts):
            u = json.loads(line)
            assert u["gold_label"] is None
            if u["speaker"] != "client":
                continue
            label = names[u["text"].split()[0][:3]]
            f.write(json.dumps({"session_id": u["session_id"], "utterance_index": u["utterance_index"], "label": label}) + "\n")
)");
  const std::string script = (dir / "fake.py").string();
  ExternalCommandFactory factory("python3 " + script + " train {train} {dev} {model}",
                                 "python3 " + script + " predict {model} {transcripts} {out}", dir / "work");
  EXPECT_FALSE(factory.concurrent());
  const auto sessions = separable(6, 2);
  const auto report = run_cv(sessions, factory, make_folds(session_ids(sessions), 3, 0.1, 1));
  EXPECT_EQ(report.mean_micro_f1, 1.0);
  EXPECT_TRUE(std::filesystem::exists(dir / "work" / "fold-0" / "train.jsonl"));

  ExternalCommandFactory broken("false", "false", dir / "broken");
  try {
    run_cv(sessions, broken, make_folds(session_ids(sessions), 3, 0.1, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ExternalCommandFailed);
  }
}
