#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <set>

#include "simobj/corpus.hpp"
#include "simobj/rng.hpp"
#include "simobj/simulate.hpp"
#include "simobj/util.hpp"
#include "test_util.hpp"

using namespace simobj;
using namespace simobj::testing;

namespace {

std::filesystem::path write_lines(const TempDir& dir, const std::string& name,
                                  const std::vector<std::string>& lines) {
  std::filesystem::path p = dir.path() / name;
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
  return p;
}

}  // namespace

TEST_CASE("minimal well-formed corpus loads") {
  TempDir dir("corpus");
  auto p = write_lines(dir, "one.jsonl",
                       {R"({"id":"d1","success":null,"turns":[{"speaker":"agent","action":"R"},{"speaker":"user","action":"Q"}]})"});
  Corpus c = load_corpus(p);
  CHECK(c.size() == 1);
  CHECK(c.name == "one");
  CHECK(c.dialogues[0].turns.size() == 2);
  CHECK(c.dialogues[0].turns[0].speaker == Speaker::Agent);
  CHECK(c.dialogues[0].turns[1].action == ActionLabel::Q);
  CHECK(!c.dialogues[0].success.has_value());
}

TEST_CASE("unknown action label is rejected with the line number") {
  TempDir dir("corpus");
  auto p = write_lines(dir, "bad.jsonl",
                       {R"({"id":"d1","success":null,"turns":[{"speaker":"user","action":"Q"}]})",
                        R"({"id":"d2","success":null,"turns":[{"speaker":"user","action":"Z"}]})"});
  CHECK_THROWS_WITH_AS(load_corpus(p),
                       doctest::Contains("unknown action label 'Z'"), ValidationError);
  try {
    load_corpus(p);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("malformed json is located") {
  TempDir dir("corpus");
  auto p = write_lines(dir, "bad.jsonl", {R"({"id":"d1")"});
  CHECK_THROWS_WITH_AS(load_corpus(p), doctest::Contains("malformed record"), ValidationError);
}

TEST_CASE("duplicate dialogue ids are rejected") {
  TempDir dir("corpus");
  std::string line = R"({"id":"d1","success":null,"turns":[{"speaker":"user","action":"Q"}]})";
  auto p = write_lines(dir, "dup.jsonl", {line, line});
  CHECK_THROWS_WITH_AS(load_corpus(p), doctest::Contains("duplicate dialogue id"),
                       ValidationError);
}

TEST_CASE("speaker and label side must agree") {
  TempDir dir("corpus");
  auto p = write_lines(dir, "side.jsonl",
                       {R"({"id":"d1","success":null,"turns":[{"speaker":"agent","action":"Q"}]})"});
  CHECK_THROWS_AS(load_corpus(p), ValidationError);
}

TEST_CASE("STOP only as the final turn, either speaker allowed") {
  TempDir dir("corpus");
  auto ok = write_lines(dir, "stop_ok.jsonl",
                        {R"({"id":"d1","success":true,"turns":[{"speaker":"user","action":"Q"},{"speaker":"agent","action":"STOP"}]})"});
  CHECK(load_corpus(ok).size() == 1);
  auto bad = write_lines(dir, "stop_bad.jsonl",
                         {R"({"id":"d1","success":null,"turns":[{"speaker":"user","action":"STOP"},{"speaker":"agent","action":"A"}]})"});
  CHECK_THROWS_WITH_AS(load_corpus(bad), doctest::Contains("STOP must be the final turn"),
                       ValidationError);
}

TEST_CASE("missing file reports a located error") {
  CHECK_THROWS_WITH_AS(load_corpus("nowhere.jsonl"), doctest::Contains("file not found"),
                       ValidationError);
}

TEST_CASE("turn 'text' field is ignored") {
  TempDir dir("corpus");
  auto p = write_lines(dir, "text.jsonl",
                       {R"({"id":"d1","success":null,"turns":[{"speaker":"user","action":"Q","text":"hello"}]})"});
  Corpus c = load_corpus(p);
  CHECK(c.dialogues[0].turns.size() == 1);
  CHECK(dialogue_to_json_line(c.dialogues[0]).find("hello") == std::string::npos);
}

TEST_CASE("empty dialogue is rejected") {
  TempDir dir("corpus");
  auto p = write_lines(dir, "empty.jsonl", {R"({"id":"d1","success":null,"turns":[]})"});
  CHECK_THROWS_WITH_AS(load_corpus(p), doctest::Contains("no turns"), ValidationError);
}

TEST_CASE("round trip is identical field for field") {
  // Seeded random corpora: save then reload must reproduce every field.
  RandomStream rng(7);
  TempDir dir("corpus");
  for (int iter = 0; iter < 20; ++iter) {
    Corpus c;
    c.name = "rt";
    std::size_t n = 1 + rng.next_u64() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      Dialogue d;
      d.id = "d" + std::to_string(i);
      std::uint32_t index = 0;
      std::size_t len = 1 + rng.next_u64() % 10;
      for (std::size_t k = 0; k < len; ++k) {
        bool user_side = k % 2 == 0;
        ActionLabel a;
        if (user_side)
          a = rng.next_unit() < 0.5 ? ActionLabel::Q : ActionLabel::F;
        else
          a = rng.next_unit() < 0.5 ? ActionLabel::R : ActionLabel::A;
        d.turns.push_back(Turn{user_side ? Speaker::User : Speaker::Agent, a, index++});
      }
      double u = rng.next_unit();
      if (u < 0.3)
        d.success = true;
      else if (u < 0.6)
        d.success = false;
      if (rng.next_unit() < 0.2) d.truncated = true;
      if (rng.next_unit() < 0.5) {
        Speaker s = opposite(d.turns.back().speaker);
        d.turns.push_back(Turn{s, ActionLabel::Stop, index++});
      }
      c.dialogues.push_back(std::move(d));
    }
    auto p = dir.path() / "rt.jsonl";
    save_corpus(c, p);
    Corpus back = load_corpus(p);
    REQUIRE(back.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(back.dialogues[i] == c.dialogues[i]);
  }
}

TEST_CASE("generated fixture corpus: line count equals dialogue count, unique ids") {
  // A small batch from a fixed policy pair, written and reloaded.
  ConditionalPolicy user;
  user.side = Speaker::User;
  user.opener = Speaker::User;
  user.vocabulary = side_outcomes(Speaker::User);
  user.table[Condition::start()] = {{ActionLabel::Q, 1.0}};
  user.table[Condition::on(ActionLabel::A)] = {
      {ActionLabel::Q, 0.3}, {ActionLabel::F, 0.4}, {ActionLabel::Stop, 0.3}};
  user.table[Condition::on(ActionLabel::R)] = {
      {ActionLabel::Q, 0.6}, {ActionLabel::F, 0.2}, {ActionLabel::Stop, 0.2}};
  ConditionalPolicy agent;
  agent.side = Speaker::Agent;
  agent.vocabulary = side_outcomes(Speaker::Agent);
  agent.table[Condition::on(ActionLabel::Q)] = {{ActionLabel::R, 0.4}, {ActionLabel::A, 0.6}};
  agent.table[Condition::on(ActionLabel::F)] = {{ActionLabel::R, 0.2}, {ActionLabel::A, 0.8}};

  SimulationConfig cfg;
  cfg.n_dialogues = 25;
  cfg.master_seed = 314;
  cfg.user_model = preset("U5");
  cfg.id_prefix = "pop1";
  SimulationBatch batch = generate_batch(PolicyPair{agent, user, Speaker::User}, cfg);

  TempDir dir("fixture");
  auto p = dir.path() / "pop1.jsonl";
  save_corpus(batch.dialogues, p);

  std::ifstream in(p);
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 25);

  Corpus back = load_corpus(p);
  CHECK(back.size() == 25);
  std::set<std::string> ids;
  for (const Dialogue& d : back.dialogues) ids.insert(d.id);
  CHECK(ids.size() == 25);
}

TEST_CASE("stats: hand-checkable mean and population std") {
  Corpus c = corpus_of({dlg("a", "QRQA"), dlg("b", "QRQARF")});
  CorpusStats s = corpus_stats(c);
  CHECK(s.dialogue_count == 2);
  CHECK(s.mean_length == doctest::Approx(5.0));
  CHECK(s.std_length == doctest::Approx(1.0));
  CHECK(s.success_coverage == doctest::Approx(0.0));
}

TEST_CASE("stats: terminal STOP does not count toward length") {
  Corpus c = corpus_of({dlg("a", "QRQA*"), dlg("b", "QRQARF*")});
  CorpusStats s = corpus_stats(c);
  CHECK(s.mean_length == doctest::Approx(5.0));
}

TEST_CASE("stats: label coverage") {
  Dialogue d1 = dlg("a", "QR");
  Dialogue d2 = dlg("b", "QA");
  d1.success = true;
  CorpusStats s = corpus_stats(corpus_of({d1, d2}));
  CHECK(s.success_coverage == doctest::Approx(0.5));
}

TEST_CASE("stats: empty corpus errors") {
  CHECK_THROWS_AS(corpus_stats(Corpus{}), ValidationError);
}

TEST_CASE("empty mid-file line is an error, trailing newline is fine") {
  TempDir dir("corpus");
  std::string line = R"({"id":"d1","success":null,"turns":[{"speaker":"user","action":"Q"}]})";
  std::filesystem::path p = dir.path() / "mid.jsonl";
  {
    std::ofstream out(p);
    out << line << "\n\n" << line << "\n";
  }
  CHECK_THROWS_WITH_AS(load_corpus(p), doctest::Contains("empty line"), ValidationError);
  std::filesystem::path q = dir.path() / "trail.jsonl";
  {
    std::ofstream out(q);
    out << line << "\n";
  }
  CHECK(load_corpus(q).size() == 1);
}
