#include <gtest/gtest.h>

#include <random>

#include "coherelab/coherence.hpp"
#include "coherelab/error.hpp"
#include "coherelab/stats.hpp"
#include "support.hpp"

using namespace coherelab;
using namespace coherelab::coherence;
using coherelab::testing::session_with;
using coherelab::testing::therapist;
using L = EmotionLabel;

namespace {

std::vector<L> labels(std::size_t pos, std::size_t neg, std::size_t neu, std::size_t mix) {
  std::vector<L> out;
  out.insert(out.end(), pos, L::Positive);
  out.insert(out.end(), neg, L::Negative);
  out.insert(out.end(), neu, L::Neutral);
  out.insert(out.end(), mix, L::Mixed);
  return out;
}

SessionRecord reported(const std::string& client, std::size_t index, const std::vector<L>& ls, double p_pos,
                       double p_neg, std::optional<double> ors = 20.0) {
  SessionRecord s = session_with(client, index, ls);
  s.poms = PomsReport{p_pos / 3, p_pos / 3, p_pos / 3, p_neg / 3, p_neg / 3, p_neg / 3};
  if (ors) s.ors = OrsReport::from_scales({*ors / 4, *ors / 4, *ors / 4, *ors / 4});
  return s;
}

}  // namespace

TEST(Proportions, FromSession) {
  const auto p = emotion_proportions(session_with("c", 0, labels(2, 1, 1, 0)), LabelField::Gold);
  EXPECT_EQ(p.u_pos, 0.5);
  EXPECT_EQ(p.u_neg, 0.25);
  EXPECT_EQ(p.u_neu, 0.25);
  EXPECT_EQ(p.u_mix, 0.0);
  const auto all_neg = emotion_proportions(session_with("c", 0, labels(0, 7, 0, 0)), LabelField::Gold);
  EXPECT_EQ(all_neg.u_neg, 1.0);
  EXPECT_EQ(all_neg.u_pos + all_neg.u_neu + all_neg.u_mix, 0.0);
}

TEST(Proportions, TherapistTurnsIgnored) {
  SessionRecord s = session_with("c", 0, labels(1, 1, 0, 2));
  const auto before = emotion_proportions(s, LabelField::Gold);
  for (int i = 0; i < 5; ++i) s.utterances.push_back(therapist(s.session_id, s.utterances.size(), "positive"));
  const auto after = emotion_proportions(s, LabelField::Gold);
  EXPECT_EQ(before.u_pos, after.u_pos);
  EXPECT_EQ(before.u_mix, after.u_mix);
}

TEST(Proportions, FuzzedSumAndTherapistInvariance) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<L> ls(1 + gen() % 60);
    for (auto& l : ls) l = kAllLabels[gen() % 4];
    SessionRecord s = session_with("c", 0, ls);
    const auto p = emotion_proportions(s, LabelField::Gold);
    EXPECT_NEAR(p.u_pos + p.u_neg + p.u_neu + p.u_mix, 1.0, 1e-12);
    std::erase_if(s.utterances, [](const Utterance& u) { return u.speaker == Speaker::Therapist; });
    const auto q = emotion_proportions(s, LabelField::Gold);
    EXPECT_EQ(p.u_pos, q.u_pos);
    EXPECT_EQ(p.u_neg, q.u_neg);
  }
}

TEST(Proportions, Errors) {
  SessionRecord s = session_with("c", 0, {});
  s.utterances.push_back(therapist(s.session_id, 0));
  EXPECT_THROW(emotion_proportions(s, LabelField::Gold), Error);
  SessionRecord missing = session_with("c", 0, labels(2, 0, 0, 0));
  try {
    emotion_counts(missing, LabelField::Predicted);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompleteSource);
  }
}

TEST(Poms, Aggregates) {
  EXPECT_EQ(poms_aggregate({3, 4, 2, 0, 0, 0}).p_pos, 9.0);
  EXPECT_EQ(poms_aggregate({0, 0, 0, 1, 2, 5}).p_neg, 8.0);
  const auto zero = poms_aggregate({});
  EXPECT_EQ(zero.p_pos, 0.0);
  EXPECT_EQ(zero.p_neg, 0.0);
}

TEST(Poms, SumsExactOnFuzzedReports) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 5000; ++trial) {
    PomsReport r;
    double* fields[] = {&r.calmness, &r.contentment, &r.vigor, &r.anger, &r.sad, &r.anxiety};
    for (double* f : fields) *f = static_cast<double>(gen() % 8001) / 1000.0;
    const auto a = poms_aggregate(r);
    EXPECT_EQ(a.p_pos, r.calmness + r.contentment + r.vigor);
    EXPECT_EQ(a.p_neg, r.anger + r.sad + r.anxiety);
  }
}

TEST(Features, DropsWithoutImputation) {
  std::vector<SessionRecord> sessions{reported("c", 0, labels(1, 1, 0, 0), 3, 3),
                                      session_with("c", 1, labels(1, 0, 0, 0)),
                                      reported("c", 2, {}, 3, 3)};
  const auto set = build_features(sessions, LabelField::Gold);
  EXPECT_EQ(set.sessions_total, 3u);
  ASSERT_EQ(set.features.size(), 1u);
  ASSERT_EQ(set.dropped.size(), 2u);
  EXPECT_EQ(set.dropped[0].reason, "NO_POMS");
  EXPECT_EQ(set.dropped[1].reason, "NO_LABELED_UTTERANCES");
}

TEST(Sessionwide, LinearDependenceGivesOne) {
  std::vector<SessionRecord> sessions;
  for (std::size_t pos = 0; pos <= 5; ++pos) {
    const auto ls = labels(pos, 5 - pos, 0, 0);
    const double u_pos = static_cast<double>(pos) / 5.0;
    sessions.push_back(reported("c", pos, ls, 10.0 * u_pos, 10.0 * (1 - u_pos)));
  }
  const auto features = build_features(sessions, LabelField::Gold).features;
  const auto r = sessionwide_coherence(features, Polarity::Positive);
  EXPECT_NEAR(r.r, 1.0, 1e-12);
  EXPECT_NEAR(r.p_value, 0.0, 1e-12);
  EXPECT_EQ(r.n, 6u);
}

TEST(Sessionwide, MatchesDirectPearson) {
  std::mt19937_64 gen(31);
  std::vector<SessionRecord> sessions;
  std::vector<double> u, p;
  for (std::size_t i = 0; i < 40; ++i) {
    const auto ls = labels(gen() % 5, gen() % 5, 1 + gen() % 3, gen() % 2);
    const double pp = static_cast<double>(gen() % 24);
    sessions.push_back(reported("c" + std::to_string(i % 4), i, ls, pp, 6));
    u.push_back(static_cast<double>(std::count(ls.begin(), ls.end(), L::Positive)) / static_cast<double>(ls.size()));
    p.push_back(sessions.back().poms->calmness + sessions.back().poms->contentment + sessions.back().poms->vigor);
  }
  const auto features = build_features(sessions, LabelField::Gold).features;
  const auto r = sessionwide_coherence(features, Polarity::Positive);
  EXPECT_EQ(r.r, stats::pearson_r(stats::PairedSeries(u, p)));
}

TEST(Clients, ExclusionsAndIdentity) {
  std::vector<SessionRecord> sessions;
  // c1: 2 sessions only
  sessions.push_back(reported("c1", 0, labels(1, 1, 0, 0), 3, 3));
  sessions.push_back(reported("c1", 1, labels(2, 1, 0, 0), 4, 3));
  // c2: constant U_pos, varying U_neg
  for (std::size_t i = 0; i < 4; ++i) sessions.push_back(reported("c2", i, labels(1, i, 3 - i, 0), 3 + i, i));
  // c3: U_pos proportional to P_pos over 5 sessions
  for (std::size_t i = 0; i < 5; ++i) {
    sessions.push_back(reported("c3", i, labels(i, 1, 4 - i, 0), 2.0 * i, 1 + (i % 2), 10 + i));
  }
  const auto features = build_features(sessions, LabelField::Gold).features;
  const auto out = client_summaries(features);
  ASSERT_EQ(out.summaries.size(), 2u);
  ASSERT_EQ(out.exclusions.size(), 3u);
  EXPECT_EQ(out.exclusions[0].client_id, "c1");
  EXPECT_EQ(out.exclusions[0].reason, "TOO_FEW_SESSIONS");
  EXPECT_EQ(out.exclusions[1].client_id, "c2");
  EXPECT_EQ(out.exclusions[1].scope, "pos");
  EXPECT_EQ(out.exclusions[1].reason, "ZERO_VARIANCE");
  EXPECT_EQ(out.exclusions[2].client_id, "c3");
  EXPECT_EQ(out.exclusions[2].scope, "neg");
  EXPECT_FALSE(out.summaries[0].coherence_pos);
  EXPECT_TRUE(out.summaries[0].coherence_neg);
  const auto& c3 = out.summaries[1];
  EXPECT_NEAR(c3.coherence_pos->r, 1.0, 1e-12);
  EXPECT_EQ(c3.n_sessions, 5u);
  EXPECT_EQ(*c3.mean_ors, 12.0);
}

TEST(Clients, MinSessionsConfigurable) {
  std::vector<SessionRecord> sessions;
  for (std::size_t i = 0; i < 4; ++i) sessions.push_back(reported("c", i, labels(i, 1, 1, 0), i, 1 + i % 2));
  const auto features = build_features(sessions, LabelField::Gold).features;
  AnalysisConfig strict;
  strict.min_sessions_per_client = 5;
  EXPECT_EQ(client_summaries(features, strict).exclusions.at(0).reason, "TOO_FEW_SESSIONS");
  EXPECT_EQ(client_summaries(features).summaries.size(), 1u);
}

TEST(Association, LinearDependenceGivesOne) {
  std::vector<ClientSummary> summaries;
  for (int i = 0; i < 6; ++i) {
    ClientSummary s;
    s.client_id = "c" + std::to_string(i);
    const double r = -0.5 + 0.2 * i;
    s.coherence_pos = CoherenceResult{r, 0.5, 5, false};
    s.mean_ors = 40.0 * r;
    summaries.push_back(s);
  }
  const auto res = coherence_ors_association(summaries, Polarity::Positive);
  EXPECT_NEAR(res.r, 1.0, 1e-12);
  EXPECT_EQ(res.n, 6u);
  EXPECT_THROW(coherence_ors_association(summaries, Polarity::Negative), Error);
}

TEST(Reports, RowsRecordErrors) {
  std::vector<SessionRecord> sessions;
  for (std::size_t i = 0; i < 4; ++i) sessions.push_back(reported("c", i, labels(i, 0, 1, 0), i, 2));
  const auto report = sessionwide_report(sessions, LabelField::Gold, "gold", {});
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_TRUE(report.rows[0].result);
  EXPECT_FALSE(report.rows[1].result);
  EXPECT_EQ(report.rows[1].error, "ZERO_VARIANCE");
  const auto json = to_json(report, "manifest.json");
  EXPECT_NE(json.find("\"error\": \"ZERO_VARIANCE\""), std::string::npos);
  EXPECT_NE(json.find("\"manifest\": \"manifest.json\""), std::string::npos);
  const std::string table = render_sessionwide(std::span(&report, 1));
  EXPECT_NE(table.find("ZERO_VARIANCE"), std::string::npos);
}

TEST(Reports, CellFormat) {
  EXPECT_EQ(format_cell({0.29, 7.8527e-05, 180, true}), "(0.29, 7.9e-05)");
  EXPECT_EQ(format_cell({0.67, 0.04832, 9, true}), "(0.67, 0.048)");
  EXPECT_EQ(format_cell({-0.051, 0.5, 9, false}), "(-0.05, 0.5)");
}

TEST(Reports, AssociationTooFewClients) {
  std::vector<SessionRecord> sessions;
  for (std::size_t i = 0; i < 3; ++i) sessions.push_back(reported("c", i, labels(i, 1, 1, 0), i, 1 + i % 2));
  const auto report = association_report(sessions, LabelField::Gold, "gold", {});
  EXPECT_EQ(report.rows[0].error, "TOO_SHORT");
}
