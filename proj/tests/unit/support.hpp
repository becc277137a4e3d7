#pragma once

#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "coherelab/model.hpp"

namespace coherelab::testing {

inline Utterance client(const std::string& session, std::size_t index, const std::string& text,
                        std::optional<EmotionLabel> gold = std::nullopt) {
  Utterance u;
  u.session_id = session;
  u.utterance_index = index;
  u.speaker = Speaker::Client;
  u.text = text;
  u.gold_label = gold;
  return u;
}

inline Utterance therapist(const std::string& session, std::size_t index, const std::string& text = "hm") {
  Utterance u;
  u.session_id = session;
  u.utterance_index = index;
  u.speaker = Speaker::Therapist;
  u.text = text;
  return u;
}

// Session whose client utterances carry the given gold labels, one therapist
// turn before each.
inline SessionRecord session_with(const std::string& client_id, std::size_t index,
                                  const std::vector<EmotionLabel>& labels) {
  SessionRecord s;
  s.client_id = client_id;
  s.session_index = index;
  s.session_id = client_id + "-s" + std::to_string(index);
  std::size_t next = 0;
  for (EmotionLabel l : labels) {
    s.utterances.push_back(therapist(s.session_id, next++));
    s.utterances.push_back(client(s.session_id, next++, std::string(to_string(l)) + " words", l));
  }
  return s;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("coherelab-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace coherelab::testing
