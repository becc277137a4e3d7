#include "coherelab/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>
#include <utility>

#include <json.hpp>

#include "coherelab/error.hpp"
#include "coherelab/io.hpp"

namespace coherelab::ingest {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const SessionRecord* CorpusBundle::find(std::string_view session_id) const {
  for (const SessionRecord& s : sessions) {
    if (s.session_id == session_id) return &s;
  }
  return nullptr;
}

SessionRecord* CorpusBundle::find(std::string_view session_id) {
  for (SessionRecord& s : sessions) {
    if (s.session_id == session_id) return &s;
  }
  return nullptr;
}

namespace {

// Splits on '\n', dropping a trailing '\r'. Line numbers are 1-based.
std::vector<std::pair<std::size_t, std::string_view>> split_lines(std::string_view content) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (end == content.size() && line.empty()) break;
    lines.emplace_back(line_no, line);
    start = end + 1;
  }
  return lines;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\t'; });
}

std::string at(std::string_view source, std::size_t line_no) {
  return std::string(source) + ":" + std::to_string(line_no);
}

[[noreturn]] void schema(std::string_view source, std::size_t line_no, std::string_view field,
                         std::string_view what) {
  throw Error(ErrorCode::SchemaViolation,
              at(source, line_no) + " field '" + std::string(field) + "' " + std::string(what));
}

json parse_line(std::string_view source, std::size_t line_no, std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedLine, at(source, line_no) + " " + e.what());
  }
  if (!obj.is_object()) {
    throw Error(ErrorCode::MalformedLine, at(source, line_no) + " is not a JSON object");
  }
  return obj;
}

const json& require(const json& obj, std::string_view source, std::size_t line_no,
                    const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) schema(source, line_no, field, "is missing");
  return *it;
}

std::string require_string(const json& obj, std::string_view source, std::size_t line_no,
                           const char* field) {
  const json& v = require(obj, source, line_no, field);
  if (!v.is_string()) schema(source, line_no, field, "must be a string");
  return v.get<std::string>();
}

std::size_t require_index(const json& obj, std::string_view source, std::size_t line_no,
                          const char* field) {
  const json& v = require(obj, source, line_no, field);
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) {
    return static_cast<std::size_t>(v.get<long long>());
  }
  schema(source, line_no, field, "must be a nonnegative integer");
}

std::optional<EmotionLabel> optional_label(const json& obj, std::string_view source,
                                           std::size_t line_no, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) schema(source, line_no, field, "must be null or a label string");
  auto label = parse_label(it->get<std::string>());
  if (!label) schema(source, line_no, field, "has unknown label '" + it->get<std::string>() + "'");
  return label;
}

void warn_unknown(const json& obj, const std::set<std::string_view>& known, std::string_view source,
                  std::size_t line_no, std::vector<std::string>& warnings) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.contains(it.key())) {
      warnings.push_back(at(source, line_no) + " unknown field '" + it.key() +
                         "' = " + it.value().dump());
    }
  }
}

void sort_bundle(CorpusBundle& bundle) {
  std::sort(bundle.sessions.begin(), bundle.sessions.end(),
            [](const SessionRecord& a, const SessionRecord& b) {
              return std::tie(a.client_id, a.session_index, a.session_id) <
                     std::tie(b.client_id, b.session_index, b.session_id);
            });
  for (SessionRecord& s : bundle.sessions) {
    std::sort(s.utterances.begin(), s.utterances.end(),
              [](const Utterance& a, const Utterance& b) {
                return a.utterance_index < b.utterance_index;
              });
  }
}

// RFC 4180 style: commas separate, double quotes wrap, "" escapes a quote.
std::optional<std::vector<std::string>> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) return std::nullopt;
  fields.push_back(std::move(field));
  return fields;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::map<std::string, SessionRecord*, std::less<>> index_sessions(CorpusBundle& bundle) {
  std::map<std::string, SessionRecord*, std::less<>> out;
  for (SessionRecord& s : bundle.sessions) out.emplace(s.session_id, &s);
  return out;
}

std::string record_source(CorpusBundle& bundle, std::string role,
                          const std::filesystem::path& path, const std::string& content) {
  bundle.source_manifest.push_back({std::move(role), path.string(), io::sha256_hex(content)});
  return path.string();
}

}  // namespace

CorpusBundle parse_transcripts(std::string_view content, std::string_view source) {
  static const std::set<std::string_view> kKnown = {"session_id",      "client_id", "session_index",
                                                    "utterance_index", "speaker",   "text",
                                                    "gold_label"};
  CorpusBundle bundle;
  std::map<std::string, std::size_t> by_id;
  std::map<std::string, std::set<std::size_t>> seen;

  for (const auto& [line_no, line] : split_lines(content)) {
    if (blank(line)) continue;
    const json obj = parse_line(source, line_no, line);

    Utterance u;
    u.session_id = require_string(obj, source, line_no, "session_id");
    const std::string client_id = require_string(obj, source, line_no, "client_id");
    const std::size_t session_index = require_index(obj, source, line_no, "session_index");
    u.utterance_index = require_index(obj, source, line_no, "utterance_index");
    const std::string speaker = require_string(obj, source, line_no, "speaker");
    auto parsed_speaker = parse_speaker(speaker);
    if (!parsed_speaker) schema(source, line_no, "speaker", "has unknown value '" + speaker + "'");
    u.speaker = *parsed_speaker;
    u.text = require_string(obj, source, line_no, "text");
    u.gold_label = optional_label(obj, source, line_no, "gold_label");
    warn_unknown(obj, kKnown, source, line_no, bundle.warnings);

    auto [it, inserted] = by_id.try_emplace(u.session_id, bundle.sessions.size());
    if (inserted) {
      SessionRecord record;
      record.session_id = u.session_id;
      record.client_id = client_id;
      record.session_index = session_index;
      bundle.sessions.push_back(std::move(record));
    }
    SessionRecord& record = bundle.sessions[it->second];
    if (record.client_id != client_id || record.session_index != session_index) {
      throw Error(ErrorCode::InconsistentSession,
                  at(source, line_no) + " session " + u.session_id +
                      " disagrees with earlier lines on client_id/session_index");
    }
    if (!seen[u.session_id].insert(u.utterance_index).second) {
      throw Error(ErrorCode::DuplicateUtterance,
                  at(source, line_no) + " (" + u.session_id + ", " +
                      std::to_string(u.utterance_index) + ")");
    }
    record.utterances.push_back(std::move(u));
  }
  sort_bundle(bundle);
  return bundle;
}

CorpusBundle parse_self_reports(std::string_view content, CorpusBundle bundle,
                                const AnalysisConfig& config, std::string_view source) {
  const auto lines = split_lines(content);
  std::size_t i = 0;
  while (i < lines.size() && blank(lines[i].second)) ++i;
  if (i == lines.size() || lines[i].second != kSelfReportHeader) {
    throw Error(ErrorCode::SchemaViolation,
                std::string(source) + " header must be exactly: " + std::string(kSelfReportHeader));
  }
  ++i;

  const auto sessions = index_sessions(bundle);
  std::set<std::string> reported;
  for (; i < lines.size(); ++i) {
    const auto& [line_no, line] = lines[i];
    if (blank(line)) continue;
    auto fields = split_csv(line);
    if (!fields) throw Error(ErrorCode::MalformedLine, at(source, line_no) + " unterminated quote");
    if (fields->size() != 13) {
      throw Error(ErrorCode::MalformedLine, at(source, line_no) + " expected 13 fields, got " +
                                                std::to_string(fields->size()));
    }
    const std::string& session_id = (*fields)[0];
    auto found = sessions.find(session_id);
    SessionRecord* record = found == sessions.end() ? nullptr : found->second;
    if (record == nullptr) {
      throw Error(ErrorCode::UnknownSession,
                  at(source, line_no) + " session " + session_id + " has no transcript");
    }
    auto index = io::parse_double((*fields)[2]);
    if (!index || *index < 0 || std::floor(*index) != *index) {
      schema(source, line_no, "session_index", "must be a nonnegative integer");
    }
    if (record->client_id != (*fields)[1] ||
        record->session_index != static_cast<std::size_t>(*index)) {
      throw Error(ErrorCode::InconsistentSession,
                  at(source, line_no) + " session " + session_id +
                      " client_id/session_index disagree with the transcript");
    }
    if (!reported.insert(session_id).second) {
      throw Error(ErrorCode::DuplicateReport,
                  at(source, line_no) + " session " + session_id + " reported twice");
    }

    // Block of columns [first, first + count); all empty means "not reported".
    auto numeric_block = [&](std::size_t first, std::size_t count, double max,
                             std::string_view prefix) -> std::optional<std::vector<double>> {
      std::size_t empty = 0;
      for (std::size_t c = first; c < first + count; ++c) empty += (*fields)[c].empty() ? 1 : 0;
      if (empty == count) return std::nullopt;
      std::vector<double> values;
      for (std::size_t c = first; c < first + count; ++c) {
        const std::string column = std::string(prefix) + std::to_string(c - first);
        auto v = io::parse_double((*fields)[c]);
        if (!v) schema(source, line_no, column, "must be a number ('" + (*fields)[c] + "')");
        if (*v < 0.0 || *v > max) {
          throw Error(ErrorCode::RangeViolation, at(source, line_no) + " " + column + "=" +
                                                     (*fields)[c] + " outside [0, " +
                                                     io::format_double(max) + "]");
        }
        values.push_back(*v);
      }
      return values;
    };

    if (auto poms = numeric_block(3, 6, config.poms_subscale_max, "poms column ")) {
      const auto& v = *poms;
      record->poms = PomsReport{v[0], v[1], v[2], v[3], v[4], v[5]};
    }
    if (auto ors = numeric_block(9, 4, 10.0, "ors column ")) {
      const auto& v = *ors;
      record->ors = OrsReport::from_scales({v[0], v[1], v[2], v[3]});
    }
  }
  return bundle;
}

CorpusBundle parse_predictions(std::string_view content, CorpusBundle bundle,
                               std::string_view source) {
  static const std::set<std::string_view> kKnown = {"session_id", "utterance_index", "label",
                                                    "scores"};
  const auto sessions = index_sessions(bundle);
  std::set<std::pair<std::string, std::size_t>> seen;
  for (const auto& [line_no, line] : split_lines(content)) {
    if (blank(line)) continue;
    const json obj = parse_line(source, line_no, line);
    const std::string session_id = require_string(obj, source, line_no, "session_id");
    const std::size_t index = require_index(obj, source, line_no, "utterance_index");
    const std::string label_text = require_string(obj, source, line_no, "label");
    auto label = parse_label(label_text);
    if (!label) schema(source, line_no, "label", "has unknown label '" + label_text + "'");
    warn_unknown(obj, kKnown, source, line_no, bundle.warnings);

    std::optional<LabelScores> scores;
    if (auto it = obj.find("scores"); it != obj.end() && !it->is_null()) {
      if (!it->is_object() || it->size() != kNumLabels) {
        schema(source, line_no, "scores", "must be an object with exactly the four labels");
      }
      LabelScores s{};
      for (EmotionLabel l : kAllLabels) {
        auto v = it->find(std::string(to_string(l)));
        if (v == it->end() || !v->is_number()) {
          schema(source, line_no, "scores", "needs a numeric '" + std::string(to_string(l)) + "'");
        }
        s[index_of(l)] = v->get<double>();
      }
      double sum = 0.0;
      bool in_range = true;
      for (double v : s) {
        sum += v;
        in_range = in_range && v >= 0.0 && v <= 1.0;
      }
      if (!in_range || std::fabs(sum - 1.0) > 1e-6) {
        throw Error(ErrorCode::ScoresNotNormalized,
                    at(source, line_no) + " scores sum to " + io::format_double(sum));
      }
      if (argmax_label(s) != *label) {
        throw Error(ErrorCode::LabelNotArgmax, at(source, line_no) + " label '" + label_text +
                                                   "' is not the argmax of its scores");
      }
      scores = s;
    }

    Utterance* target = nullptr;
    if (auto found = sessions.find(session_id); found != sessions.end()) {
      auto& utterances = found->second->utterances;
      auto it = std::lower_bound(
          utterances.begin(), utterances.end(), index,
          [](const Utterance& u, std::size_t i) { return u.utterance_index < i; });
      if (it != utterances.end() && it->utterance_index == index) target = &*it;
    }
    if (target == nullptr) {
      throw Error(ErrorCode::UnknownUtterance, at(source, line_no) + " (" + session_id + ", " +
                                                   std::to_string(index) + ")");
    }
    if (target->speaker == Speaker::Therapist) {
      throw Error(ErrorCode::TargetsTherapist, at(source, line_no) + " (" + session_id + ", " +
                                                   std::to_string(index) + ")");
    }
    if (!seen.insert({session_id, index}).second) {
      throw Error(ErrorCode::DuplicatePrediction, at(source, line_no) + " (" + session_id + ", " +
                                                      std::to_string(index) + ")");
    }
    target->predicted_label = label;
    target->prediction_scores = scores;
  }
  return bundle;
}

CorpusBundle load_transcripts(const std::filesystem::path& path) {
  const std::string content = io::read_text_file(path);
  CorpusBundle bundle = parse_transcripts(content, path.string());
  record_source(bundle, "transcripts", path, content);
  return bundle;
}

CorpusBundle load_self_reports(const std::filesystem::path& path, CorpusBundle bundle,
                               const AnalysisConfig& config) {
  const std::string content = io::read_text_file(path);
  bundle = parse_self_reports(content, std::move(bundle), config, path.string());
  record_source(bundle, "self_reports", path, content);
  return bundle;
}

CorpusBundle load_predictions(const std::filesystem::path& path, CorpusBundle bundle) {
  const std::string content = io::read_text_file(path);
  bundle = parse_predictions(content, std::move(bundle), path.string());
  record_source(bundle, "predictions", path, content);
  return bundle;
}

std::string write_transcripts(const std::vector<SessionRecord>& sessions) {
  std::string out;
  for (const SessionRecord& s : sessions) {
    for (const Utterance& u : s.utterances) {
      ordered_json line;
      line["session_id"] = s.session_id;
      line["client_id"] = s.client_id;
      line["session_index"] = s.session_index;
      line["utterance_index"] = u.utterance_index;
      line["speaker"] = std::string(to_string(u.speaker));
      line["text"] = u.text;
      line["gold_label"] = u.gold_label ? ordered_json(std::string(to_string(*u.gold_label)))
                                        : ordered_json(nullptr);
      out += line.dump();
      out += '\n';
    }
  }
  return out;
}

std::string write_self_reports(const std::vector<SessionRecord>& sessions) {
  std::string out(kSelfReportHeader);
  out += '\n';
  for (const SessionRecord& s : sessions) {
    if (!s.poms && !s.ors) continue;
    out += csv_field(s.session_id) + ',' + csv_field(s.client_id) + ',' +
           std::to_string(s.session_index);
    if (s.poms) {
      for (double v : s.poms->values()) out += ',' + io::format_double(v);
    } else {
      out += ",,,,,,";
    }
    if (s.ors) {
      for (double v : s.ors->scales) out += ',' + io::format_double(v);
    } else {
      out += ",,,,";
    }
    out += '\n';
  }
  return out;
}

std::string write_predictions(const std::vector<SessionRecord>& sessions) {
  std::string out;
  for (const SessionRecord& s : sessions) {
    for (const Utterance& u : s.utterances) {
      if (u.speaker != Speaker::Client || !u.predicted_label) continue;
      ordered_json line;
      line["session_id"] = s.session_id;
      line["utterance_index"] = u.utterance_index;
      line["label"] = std::string(to_string(*u.predicted_label));
      if (u.prediction_scores) {
        ordered_json scores;
        for (EmotionLabel l : kAllLabels) {
          scores[std::string(to_string(l))] = (*u.prediction_scores)[index_of(l)];
        }
        line["scores"] = scores;
      }
      out += line.dump();
      out += '\n';
    }
  }
  return out;
}

std::string canonical_hash(const std::vector<SessionRecord>& sessions) {
  return io::sha256_hex(write_transcripts(sessions) + "\x1e" + write_self_reports(sessions) +
                        "\x1e" + write_predictions(sessions));
}

}  // namespace coherelab::ingest
