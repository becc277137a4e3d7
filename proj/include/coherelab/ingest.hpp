#pragma once

// Reads the three interchange files into SessionRecords and writes them back.
//
//   transcripts.jsonl  one utterance per line
//   self_reports.csv   one POMS/ORS row per session
//   predictions.jsonl  one predicted label (optionally with scores) per line
//
// Loading is strict: the first schema or join failure throws coherelab::Error
// with the failing line number in the message.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "coherelab/model.hpp"

namespace coherelab::ingest {

struct SourceFile {
  std::string role;  // "transcripts" | "self_reports" | "predictions"
  std::string path;
  std::string sha256;

  bool operator==(const SourceFile&) const = default;
};

struct CorpusBundle {
  // Sorted by (client_id, session_index, session_id); utterances by index.
  std::vector<SessionRecord> sessions;
  std::vector<SourceFile> source_manifest;
  std::vector<std::string> warnings;

  const SessionRecord* find(std::string_view session_id) const;
  SessionRecord* find(std::string_view session_id);
};

inline constexpr std::string_view kSelfReportHeader =
    "session_id,client_id,session_index,poms_calmness,poms_contentment,poms_vigor,"
    "poms_anger,poms_sad,poms_anxiety,ors_1,ors_2,ors_3,ors_4";

// Text-level parsers. `source_name` is only used in messages.
CorpusBundle parse_transcripts(std::string_view content, std::string_view source_name = "<memory>");
CorpusBundle parse_self_reports(std::string_view content, CorpusBundle bundle,
                                const AnalysisConfig& config = {},
                                std::string_view source_name = "<memory>");
CorpusBundle parse_predictions(std::string_view content, CorpusBundle bundle,
                               std::string_view source_name = "<memory>");

// File-level loaders; also record path and content hash in the manifest.
CorpusBundle load_transcripts(const std::filesystem::path& path);
CorpusBundle load_self_reports(const std::filesystem::path& path, CorpusBundle bundle,
                               const AnalysisConfig& config = {});
CorpusBundle load_predictions(const std::filesystem::path& path, CorpusBundle bundle);

// Serializers producing the same formats. Output is canonical: sessions in
// bundle order, fixed key order, shortest round-trip numbers.
std::string write_transcripts(const std::vector<SessionRecord>& sessions);
std::string write_self_reports(const std::vector<SessionRecord>& sessions);
// Client utterances that carry predicted_label.
std::string write_predictions(const std::vector<SessionRecord>& sessions);

// SHA-256 over the concatenated canonical serializations.
std::string canonical_hash(const std::vector<SessionRecord>& sessions);

}  // namespace coherelab::ingest
