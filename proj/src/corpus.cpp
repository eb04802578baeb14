#include "simobj/corpus.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "simobj/util.hpp"

namespace simobj {

using json = nlohmann::ordered_json;

const char* to_string(ActionLabel a) {
  switch (a) {
    case ActionLabel::Q: return "Q";
    case ActionLabel::R: return "R";
    case ActionLabel::F: return "F";
    case ActionLabel::A: return "A";
    case ActionLabel::Stop: return "STOP";
  }
  return "?";
}

const char* to_string(Speaker s) { return s == Speaker::User ? "user" : "agent"; }

std::optional<ActionLabel> parse_action(const std::string& s) {
  if (s == "Q") return ActionLabel::Q;
  if (s == "R") return ActionLabel::R;
  if (s == "F") return ActionLabel::F;
  if (s == "A") return ActionLabel::A;
  if (s == "STOP") return ActionLabel::Stop;
  return std::nullopt;
}

std::optional<Speaker> parse_speaker(const std::string& s) {
  if (s == "user") return Speaker::User;
  if (s == "agent") return Speaker::Agent;
  return std::nullopt;
}

std::size_t Dialogue::length() const {
  std::size_t n = turns.size();
  if (n > 0 && turns.back().action == ActionLabel::Stop) --n;
  return n;
}

std::vector<ActionLabel> Dialogue::action_sequence() const {
  std::vector<ActionLabel> seq;
  seq.reserve(turns.size());
  for (const Turn& t : turns)
    if (t.action != ActionLabel::Stop) seq.push_back(t.action);
  return seq;
}

void validate_dialogue(const Dialogue& d, const std::string& context) {
  if (d.turns.empty()) throw ValidationError(context + ": dialogue has no turns");
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const Turn& t = d.turns[i];
    if (t.index != i)
      throw ValidationError(context + ": turn indices not consecutive from 0");
    if (!speaker_matches(t.speaker, t.action))
      throw ValidationError(context + ": action " + to_string(t.action) +
                            " is not a " + to_string(t.speaker) + " action");
    if (t.action == ActionLabel::Stop && i + 1 != d.turns.size())
      throw ValidationError(context + ": STOP must be the final turn");
  }
}

namespace {

Dialogue dialogue_from_json(const json& j, const std::string& context) {
  if (!j.is_object()) throw ValidationError(context + ": record is not an object");
  Dialogue d;
  if (!j.contains("id") || !j["id"].is_string())
    throw ValidationError(context + ": missing or non-string field 'id'");
  d.id = j["id"].get<std::string>();
  if (j.contains("success") && !j["success"].is_null()) {
    if (!j["success"].is_boolean())
      throw ValidationError(context + ": field 'success' must be true, false, or null");
    d.success = j["success"].get<bool>();
  }
  if (j.contains("truncated")) {
    if (!j["truncated"].is_boolean())
      throw ValidationError(context + ": field 'truncated' must be boolean");
    d.truncated = j["truncated"].get<bool>();
  }
  if (!j.contains("turns") || !j["turns"].is_array())
    throw ValidationError(context + ": missing or non-array field 'turns'");
  std::uint32_t index = 0;
  for (const json& jt : j["turns"]) {
    if (!jt.is_object()) throw ValidationError(context + ": turn is not an object");
    if (!jt.contains("speaker") || !jt["speaker"].is_string())
      throw ValidationError(context + ": turn missing field 'speaker'");
    if (!jt.contains("action") || !jt["action"].is_string())
      throw ValidationError(context + ": turn missing field 'action'");
    auto sp = parse_speaker(jt["speaker"].get<std::string>());
    if (!sp)
      throw ValidationError(context + ": unknown speaker '" +
                            jt["speaker"].get<std::string>() + "'");
    auto ac = parse_action(jt["action"].get<std::string>());
    if (!ac)
      throw ValidationError(context + ": unknown action label '" +
                            jt["action"].get<std::string>() + "'");
    // An optional "text" field is ignored.
    d.turns.push_back(Turn{*sp, *ac, index++});
  }
  validate_dialogue(d, context);
  return d;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": file not found");

  Corpus c;
  c.name = path.stem().string();
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string context = path.filename().string() + ":" + std::to_string(line_no);
    if (line.empty()) {
      if (in.peek() == std::ifstream::traits_type::eof()) break;  // trailing newline
      throw ValidationError(context + ": empty line");
    }
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ValidationError(context + ": malformed record");
    Dialogue d = dialogue_from_json(j, context);
    if (!ids.insert(d.id).second)
      throw ValidationError(context + ": duplicate dialogue id '" + d.id + "'");
    c.dialogues.push_back(std::move(d));
  }
  return c;
}

std::string dialogue_to_json_line(const Dialogue& d) {
  json j;
  j["id"] = d.id;
  if (d.success)
    j["success"] = *d.success;
  else
    j["success"] = nullptr;
  json turns = json::array();
  for (const Turn& t : d.turns)
    turns.push_back(json{{"speaker", to_string(t.speaker)}, {"action", to_string(t.action)}});
  j["turns"] = std::move(turns);
  if (d.truncated) j["truncated"] = true;
  return j.dump();
}

void save_corpus(const Corpus& c, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const Dialogue& d : c.dialogues) out << dialogue_to_json_line(d) << '\n';
  write_file(path, out.str());
}

CorpusStats corpus_stats(const Corpus& c) {
  if (c.empty()) throw ValidationError("empty corpus");
  CorpusStats s;
  s.dialogue_count = c.size();
  double sum = 0.0, labeled = 0.0;
  for (const Dialogue& d : c.dialogues) {
    sum += static_cast<double>(d.length());
    if (d.success) labeled += 1.0;
  }
  double n = static_cast<double>(c.size());
  s.mean_length = sum / n;
  double sq = 0.0;
  for (const Dialogue& d : c.dialogues) {
    double dev = static_cast<double>(d.length()) - s.mean_length;
    sq += dev * dev;
  }
  s.std_length = std::sqrt(sq / n);
  s.success_coverage = labeled / n;
  return s;
}

std::string stats_csv_row(const CorpusStats& s) {
  return std::to_string(s.dialogue_count) + "," + fmt_full(s.mean_length) + "," +
         fmt_full(s.std_length) + "," + fmt_full(s.success_coverage);
}

}  // namespace simobj
