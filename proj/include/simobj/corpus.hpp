#pragma once

// QRFA dialogue data model and the line-delimited corpus format.
//
// A corpus file holds one dialogue per line:
//   {"id": "...", "success": true|false|null,
//    "turns": [{"speaker": "user"|"agent", "action": "Q"|"R"|"F"|"A"|"STOP"}, ...]}
// Turns may carry an extra "text" field, which is ignored on load.
// Corpora are immutable after load and safe to share across threads.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simobj/error.hpp"

namespace simobj {

// Q and F are user actions, R and A agent actions. Stop is the terminal
// marker: optional in input files, synthesized during generation, never
// followed by another turn.
enum class ActionLabel : std::uint8_t { Q = 0, R = 1, F = 2, A = 3, Stop = 4 };

enum class Speaker : std::uint8_t { User = 0, Agent = 1 };

const char* to_string(ActionLabel a);
const char* to_string(Speaker s);
std::optional<ActionLabel> parse_action(const std::string& s);
std::optional<Speaker> parse_speaker(const std::string& s);

inline bool is_user_action(ActionLabel a) { return a == ActionLabel::Q || a == ActionLabel::F; }
inline bool is_agent_action(ActionLabel a) { return a == ActionLabel::R || a == ActionLabel::A; }
inline Speaker opposite(Speaker s) { return s == Speaker::User ? Speaker::Agent : Speaker::User; }

// Stop may carry either speaker; Q/F must be user turns, R/A agent turns.
inline bool speaker_matches(Speaker s, ActionLabel a) {
  if (a == ActionLabel::Stop) return true;
  return s == Speaker::User ? is_user_action(a) : is_agent_action(a);
}

struct Turn {
  Speaker speaker = Speaker::User;
  ActionLabel action = ActionLabel::Q;
  std::uint32_t index = 0;  // ordinal position within the dialogue

  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;
  std::optional<bool> success;
  bool truncated = false;  // generation hit the length cap

  bool operator==(const Dialogue&) const = default;

  // Turn count excluding a terminal Stop.
  std::size_t length() const;
  // Actions in order, excluding Stop.
  std::vector<ActionLabel> action_sequence() const;
};

struct Corpus {
  std::string name;
  std::vector<Dialogue> dialogues;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return dialogues.size(); }
  bool empty() const { return dialogues.empty(); }
};

// Dialogue invariants shared by the loader and the generator: non-empty,
// consecutive indices from 0, speaker/label consistency, at most one Stop
// and only as the final turn. Throws ValidationError prefixed with `context`.
void validate_dialogue(const Dialogue& d, const std::string& context);

// Throws ValidationError with the offending line number on the first
// malformed record, unknown action label, or duplicate dialogue id.
Corpus load_corpus(const std::filesystem::path& path);

void save_corpus(const Corpus& c, const std::filesystem::path& path);
std::string dialogue_to_json_line(const Dialogue& d);

struct CorpusStats {
  std::size_t dialogue_count = 0;
  double mean_length = 0.0;  // over non-Stop turn counts
  double std_length = 0.0;   // population standard deviation
  double success_coverage = 0.0;
};

CorpusStats corpus_stats(const Corpus& c);  // throws ValidationError on empty corpus
std::string stats_csv_row(const CorpusStats& s);

}  // namespace simobj
