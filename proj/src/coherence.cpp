#include "coherelab/coherence.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "coherelab/error.hpp"
#include "coherelab/stats.hpp"

namespace coherelab::coherence {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<Polarity, 2> kPolarities = {Polarity::Positive, Polarity::Negative};

const char* kIdentityNote =
    "client-level coherence is one Pearson r per client over that client's sessions; the mean "
    "over per-client coherence is therefore the identity";
const char* kOrsNote =
    "well-being is the mean ORS total per client, used for both emotion rows (ORS has no "
    "emotion-specific subscale)";
const char* kDropNote = "sessions without a POMS report or without client utterances are dropped, not imputed";

std::pair<std::vector<double>, std::vector<double>> series(std::span<const SessionFeatures> features,
                                                           Polarity polarity) {
  std::vector<double> u;
  std::vector<double> p;
  for (const SessionFeatures& f : features) {
    u.push_back(f.proportions.of(polarity));
    p.push_back(f.poms.of(polarity));
  }
  return {std::move(u), std::move(p)};
}

ordered_json result_json(const CoherenceResult& r) {
  ordered_json j;
  j["r"] = r.r;
  j["p_value"] = r.p_value;
  j["n"] = r.n;
  j["significant"] = r.significant;
  return j;
}

ordered_json row_json(const ReportRow& row, std::string pair) {
  ordered_json j;
  j["pair"] = std::move(pair);
  if (row.result) {
    j["r"] = row.result->r;
    j["p_value"] = row.result->p_value;
    j["n"] = row.result->n;
    j["significant"] = row.result->significant;
  } else {
    j["error"] = row.error;
  }
  return j;
}

ordered_json dropped_json(const std::vector<DroppedSession>& dropped) {
  ordered_json out = ordered_json::array();
  for (const DroppedSession& d : dropped) out.push_back({{"session_id", d.session_id}, {"reason", d.reason}});
  return out;
}

ordered_json config_json(const AnalysisConfig& config) {
  ordered_json j;
  j["alpha"] = config.alpha;
  j["poms_subscale_max"] = config.poms_subscale_max;
  j["min_sessions_per_client"] = config.min_sessions_per_client;
  return j;
}

template <typename F>
ReportRow make_row(Polarity polarity, F&& compute) {
  ReportRow row;
  row.polarity = polarity;
  try {
    row.result = compute();
  } catch (const Error& e) {
    if (is_numerics_error(e.code())) throw;
    row.error = std::string(to_string(e.code()));
  }
  return row;
}

std::string session_pair(Polarity p) {
  return p == Polarity::Positive ? "(P_pos, U_pos)" : "(P_neg, U_neg)";
}

std::string association_pair(Polarity p) {
  return p == Polarity::Positive ? "Cohr(U_pos, P_pos)" : "Cohr(U_neg, P_neg)";
}

std::string cell(const ReportRow& row) {
  if (!row.result) return row.error;
  return format_cell(*row.result) + (row.result->significant ? "*" : "");
}

}  // namespace

std::string_view to_string(LabelField field) { return field == LabelField::Gold ? "gold" : "predicted"; }

EmotionCounts emotion_counts(const SessionRecord& session, LabelField field) {
  EmotionCounts counts;
  for (const Utterance& u : session.utterances) {
    if (u.speaker != Speaker::Client) continue;
    const auto& label = field == LabelField::Gold ? u.gold_label : u.predicted_label;
    if (!label) {
      throw Error(ErrorCode::IncompleteSource, "(" + session.session_id + ", " +
                                                   std::to_string(u.utterance_index) + ") has no " +
                                                   std::string(to_string(field)) + " label");
    }
    counts.add(*label);
  }
  return counts;
}

EmotionProportions emotion_proportions(const SessionRecord& session, LabelField field) {
  const EmotionCounts counts = emotion_counts(session, field);
  if (counts.total_labeled == 0) {
    throw Error(ErrorCode::NoLabeledUtterances, "session " + session.session_id);
  }
  return EmotionProportions::from_counts(counts);
}

PomsAggregate poms_aggregate(const PomsReport& report) {
  return {report.calmness + report.contentment + report.vigor,
          report.anger + report.sad + report.anxiety};
}

FeatureSet build_features(std::span<const SessionRecord> sessions, LabelField field) {
  FeatureSet set;
  set.sessions_total = sessions.size();
  for (const SessionRecord& s : sessions) {
    if (!s.poms) {
      set.dropped.push_back({s.session_id, "NO_POMS"});
      continue;
    }
    const EmotionCounts counts = emotion_counts(s, field);
    if (counts.total_labeled == 0) {
      set.dropped.push_back({s.session_id, "NO_LABELED_UTTERANCES"});
      continue;
    }
    SessionFeatures f;
    f.session_id = s.session_id;
    f.client_id = s.client_id;
    f.session_index = s.session_index;
    f.proportions = EmotionProportions::from_counts(counts);
    f.poms = poms_aggregate(*s.poms);
    if (s.ors) f.ors_total = s.ors->total;
    set.features.push_back(std::move(f));
  }
  return set;
}

CoherenceResult sessionwide_coherence(std::span<const SessionFeatures> features, Polarity polarity,
                                      const AnalysisConfig& config) {
  auto [u, p] = series(features, polarity);
  return stats::pearson_with_p(stats::PairedSeries(std::move(u), std::move(p)), config.alpha);
}

ClientSummaries client_summaries(std::span<const SessionFeatures> features, const AnalysisConfig& config) {
  std::map<std::string, std::vector<SessionFeatures>> by_client;
  for (const SessionFeatures& f : features) by_client[f.client_id].push_back(f);

  ClientSummaries out;
  for (auto& [client_id, rows] : by_client) {
    std::sort(rows.begin(), rows.end(), [](const SessionFeatures& a, const SessionFeatures& b) {
      return a.session_index < b.session_index;
    });
    if (rows.size() < config.min_sessions_per_client) {
      out.exclusions.push_back({client_id, "client", "TOO_FEW_SESSIONS"});
      continue;
    }
    ClientSummary summary;
    summary.client_id = client_id;
    summary.n_sessions = rows.size();
    for (Polarity polarity : kPolarities) {
      try {
        auto& slot = polarity == Polarity::Positive ? summary.coherence_pos : summary.coherence_neg;
        slot = sessionwide_coherence(rows, polarity, config);
      } catch (const Error& e) {
        if (is_numerics_error(e.code())) throw;
        out.exclusions.push_back({client_id, std::string(to_string(polarity)),
                                  std::string(to_string(e.code()))});
      }
    }
    std::vector<double> ors;
    for (const SessionFeatures& f : rows) {
      if (f.ors_total) ors.push_back(*f.ors_total);
    }
    if (ors.empty()) {
      out.exclusions.push_back({client_id, "ors", "NO_ORS"});
    } else {
      summary.mean_ors = stats::mean(ors);
    }
    out.summaries.push_back(std::move(summary));
  }
  return out;
}

CoherenceResult coherence_ors_association(std::span<const ClientSummary> summaries, Polarity polarity,
                                          const AnalysisConfig& config) {
  std::vector<double> coherence;
  std::vector<double> wellbeing;
  for (const ClientSummary& s : summaries) {
    const auto& c = s.coherence(polarity);
    if (!c || !s.mean_ors) continue;
    coherence.push_back(c->r);
    wellbeing.push_back(*s.mean_ors);
  }
  return stats::pearson_with_p(stats::PairedSeries(std::move(coherence), std::move(wellbeing)),
                               config.alpha);
}

SessionwideReport sessionwide_report(std::span<const SessionRecord> sessions, LabelField field,
                                     std::string label_source, const AnalysisConfig& config) {
  config.check();
  const FeatureSet set = build_features(sessions, field);
  SessionwideReport report;
  report.label_source = std::move(label_source);
  report.config = config;
  report.sessions_total = set.sessions_total;
  report.dropped = set.dropped;
  for (Polarity polarity : kPolarities) {
    report.rows.push_back(
        make_row(polarity, [&] { return sessionwide_coherence(set.features, polarity, config); }));
  }
  return report;
}

AssociationReport association_report(std::span<const SessionRecord> sessions, LabelField field,
                                      std::string label_source, const AnalysisConfig& config) {
  config.check();
  const FeatureSet set = build_features(sessions, field);
  AssociationReport report;
  report.label_source = std::move(label_source);
  report.config = config;
  report.sessions_total = set.sessions_total;
  report.dropped = set.dropped;
  report.clients = client_summaries(set.features, config);
  for (Polarity polarity : kPolarities) {
    report.rows.push_back(make_row(polarity, [&] {
      return coherence_ors_association(report.clients.summaries, polarity, config);
    }));
  }
  return report;
}

std::string to_json(const SessionwideReport& report, std::string_view manifest) {
  ordered_json doc;
  doc["analysis"] = "sessionwide_coherence";
  doc["manifest"] = std::string(manifest);
  doc["label_source"] = report.label_source;
  doc["config"] = config_json(report.config);
  doc["sessions_total"] = report.sessions_total;
  doc["sessions_used"] = report.sessions_total - report.dropped.size();
  doc["sessions_dropped"] = report.dropped.size();
  doc["dropped"] = dropped_json(report.dropped);
  ordered_json rows = ordered_json::array();
  for (const ReportRow& row : report.rows) rows.push_back(row_json(row, session_pair(row.polarity)));
  doc["rows"] = rows;
  doc["notes"] = {"sessions from all clients are pooled into one correlation per emotion", kDropNote};
  return doc.dump(2) + "\n";
}

std::string to_json(const AssociationReport& report, std::string_view manifest) {
  ordered_json doc;
  doc["analysis"] = "coherence_ors_association";
  doc["manifest"] = std::string(manifest);
  doc["label_source"] = report.label_source;
  doc["config"] = config_json(report.config);
  doc["sessions_total"] = report.sessions_total;
  doc["sessions_dropped"] = report.dropped.size();
  doc["dropped"] = dropped_json(report.dropped);
  ordered_json clients = ordered_json::array();
  for (const ClientSummary& s : report.clients.summaries) {
    ordered_json c;
    c["client_id"] = s.client_id;
    c["n_sessions"] = s.n_sessions;
    c["coherence_pos"] = s.coherence_pos ? result_json(*s.coherence_pos) : ordered_json(nullptr);
    c["coherence_neg"] = s.coherence_neg ? result_json(*s.coherence_neg) : ordered_json(nullptr);
    c["mean_ors"] = s.mean_ors ? ordered_json(*s.mean_ors) : ordered_json(nullptr);
    clients.push_back(c);
  }
  doc["clients"] = clients;
  ordered_json exclusions = ordered_json::array();
  for (const ClientExclusion& e : report.clients.exclusions) {
    exclusions.push_back({{"client_id", e.client_id}, {"scope", e.scope}, {"reason", e.reason}});
  }
  doc["exclusions"] = exclusions;
  ordered_json rows = ordered_json::array();
  for (const ReportRow& row : report.rows) {
    auto j = row_json(row, association_pair(row.polarity) + " vs ORS");
    rows.push_back(j);
  }
  doc["rows"] = rows;
  doc["notes"] = {kIdentityNote, kOrsNote, kDropNote};
  return doc.dump(2) + "\n";
}

std::string format_cell(const CoherenceResult& result) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "(%.2f, %.2g)", result.r, result.p_value);
  return buf;
}

std::string render_sessionwide(std::span<const SessionwideReport> columns) {
  std::ostringstream out;
  char buf[128];
  out << "Session-wide correlation between POMS and utterance emotion labels\n\n";
  std::snprintf(buf, sizeof buf, "%-18s", "");
  out << buf;
  for (const SessionwideReport& c : columns) {
    std::snprintf(buf, sizeof buf, "  %-22s", c.label_source.c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t row = 0; row < kPolarities.size(); ++row) {
    std::snprintf(buf, sizeof buf, "%-18s", session_pair(kPolarities[row]).c_str());
    out << buf;
    for (const SessionwideReport& c : columns) {
      std::snprintf(buf, sizeof buf, "  %-22s", cell(c.rows[row]).c_str());
      out << buf;
    }
    out << '\n';
  }
  std::snprintf(buf, sizeof buf, "%-18s", "sessions used");
  out << buf;
  for (const SessionwideReport& c : columns) {
    const std::string used = std::to_string(c.sessions_total - c.dropped.size()) + " of " +
                             std::to_string(c.sessions_total);
    std::snprintf(buf, sizeof buf, "  %-22s", used.c_str());
    out << buf;
  }
  out << "\n\n";
  if (!columns.empty()) {
    out << "cells are (r, p); * marks p < alpha = " << columns.front().config.alpha << "\n";
  }
  out << "note: " << kDropNote << "\n";
  return out.str();
}

std::string render_association(const AssociationReport& report) {
  std::ostringstream out;
  char buf[160];
  out << "Client-level correlation between emotional coherence and ORS\n";
  out << "label source: " << report.label_source << ", clients summarized: "
      << report.clients.summaries.size() << ", exclusions: " << report.clients.exclusions.size()
      << "\n\n";
  std::snprintf(buf, sizeof buf, "%-22s  %-22s  %s\n", "", "ORS", "n");
  out << buf;
  for (const ReportRow& row : report.rows) {
    const std::string n = row.result ? std::to_string(row.result->n) : "-";
    std::snprintf(buf, sizeof buf, "%-22s  %-22s  %s\n", association_pair(row.polarity).c_str(),
                  cell(row).c_str(), n.c_str());
    out << buf;
  }
  out << "\ncells are (r, p); * marks p < alpha = " << report.config.alpha << "\n";
  for (const ClientExclusion& e : report.clients.exclusions) {
    out << "excluded: client " << e.client_id << " (" << e.scope << ") " << e.reason << "\n";
  }
  out << "note: " << kIdentityNote << "\n";
  out << "note: " << kOrsNote << "\n";
  out << "note: " << kDropNote << "\n";
  return out.str();
}

}  // namespace coherelab::coherence
