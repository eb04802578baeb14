#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "simobj/policy.hpp"
#include "simobj/util.hpp"
#include "test_util.hpp"

using namespace simobj;
using namespace simobj::testing;

namespace {

// Three dialogues giving user transitions R->Q, R->Q, R->F. Each ends on the
// user turn, so the end-of-dialogue Stop lands in the agent rows only.
Corpus r_transitions() {
  Dialogue d1{"d1", {{Speaker::Agent, ActionLabel::R, 0}, {Speaker::User, ActionLabel::Q, 1}}, {}, false};
  Dialogue d2{"d2", {{Speaker::Agent, ActionLabel::R, 0}, {Speaker::User, ActionLabel::Q, 1}}, {}, false};
  Dialogue d3{"d3", {{Speaker::Agent, ActionLabel::R, 0}, {Speaker::User, ActionLabel::F, 1}}, {}, false};
  return corpus_of({d1, d2, d3});
}

ConditionalPolicy user_policy_rows(
    std::initializer_list<std::pair<Condition, PolicyRow>> rows) {
  ConditionalPolicy p;
  p.side = Speaker::User;
  p.opener = Speaker::User;
  p.vocabulary = side_outcomes(Speaker::User);
  for (const auto& [c, r] : rows) p.table[c] = r;
  p.validate();
  return p;
}

}  // namespace

TEST_CASE("estimation by direct counting") {
  ConditionalPolicy p = estimate_policy(r_transitions(), Speaker::User);
  const PolicyRow& row = p.table.at(Condition::on(ActionLabel::R));
  CHECK(row.at(ActionLabel::Q) == doctest::Approx(2.0 / 3.0));
  CHECK(row.at(ActionLabel::F) == doctest::Approx(1.0 / 3.0));
  CHECK(row.at(ActionLabel::Stop) == doctest::Approx(0.0));
  CHECK(p.condition_weights.at(Condition::on(ActionLabel::R)) == doctest::Approx(3.0));
}

TEST_CASE("additive smoothing arithmetic") {
  ConditionalPolicy p = estimate_policy(r_transitions(), Speaker::User, {1.0, false});
  const PolicyRow& row = p.table.at(Condition::on(ActionLabel::R));
  CHECK(row.at(ActionLabel::Q) == doctest::Approx(0.5));   // (2+1)/(3+3)
  CHECK(row.at(ActionLabel::F) == doctest::Approx(2.0 / 6.0));
  CHECK(row.at(ActionLabel::Stop) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("negative pseudo-count rejected") {
  CHECK_THROWS_AS(estimate_policy(r_transitions(), Speaker::User, {-0.5, false}),
                  ConfigError);
}

TEST_CASE("no observations for a side") {
  // The user opens and stops explicitly, so the agent side never acts and no
  // implicit end-of-dialogue Stop lands in its rows either.
  Dialogue d{"a",
             {{Speaker::User, ActionLabel::Q, 0}, {Speaker::User, ActionLabel::Stop, 1}},
             {},
             false};
  Corpus c = corpus_of({d});
  CHECK_THROWS_WITH_AS(estimate_policy(c, Speaker::Agent), doctest::Contains("no observations"),
                       ValidationError);
  // Trailing off instead would credit the agent with a Q -> Stop event.
  Corpus trailing = corpus_of({dlg("b", "Q")});
  ConditionalPolicy agent = estimate_policy(trailing, Speaker::Agent);
  CHECK(agent.table.at(Condition::on(ActionLabel::Q)).at(ActionLabel::Stop) ==
        doctest::Approx(1.0));
}

TEST_CASE("end-of-dialogue credits Stop to the side that would act next") {
  // [u:Q, a:R] trails off, so the user row R gains a Stop count.
  Corpus c = corpus_of({dlg("a", "QR")});
  ConditionalPolicy user = estimate_policy(c, Speaker::User);
  CHECK(user.table.at(Condition::on(ActionLabel::R)).at(ActionLabel::Stop) ==
        doctest::Approx(1.0));
  CHECK(user.table.at(Condition::start()).at(ActionLabel::Q) == doctest::Approx(1.0));
  // The agent side only saw Q -> R.
  ConditionalPolicy agent = estimate_policy(c, Speaker::Agent);
  CHECK(agent.table.at(Condition::on(ActionLabel::Q)).at(ActionLabel::R) ==
        doctest::Approx(1.0));
}

TEST_CASE("optional Stop credit for the final responder") {
  // [u:Q, a:R, u:F] trails off. Default: agent row F gains the Stop. With the
  // flag, the user row R additionally gains one (the user answered R with F
  // and then let the dialogue die).
  Corpus c = corpus_of({dlg("a", "QRF")});
  ConditionalPolicy plain = estimate_policy(c, Speaker::User);
  CHECK(plain.table.at(Condition::on(ActionLabel::R)).at(ActionLabel::Stop) ==
        doctest::Approx(0.0));
  ConditionalPolicy credited = estimate_policy(c, Speaker::User, {0.0, true});
  CHECK(credited.table.at(Condition::on(ActionLabel::R)).at(ActionLabel::Stop) ==
        doctest::Approx(0.5));
  ConditionalPolicy agent = estimate_policy(c, Speaker::Agent);
  CHECK(agent.table.at(Condition::on(ActionLabel::F)).at(ActionLabel::Stop) ==
        doctest::Approx(1.0));
}

TEST_CASE("explicit Stop turns count as ordinary transitions") {
  Corpus c = corpus_of({dlg("a", "QR*")});  // '*' after R -> user Stop
  ConditionalPolicy user = estimate_policy(c, Speaker::User);
  CHECK(user.table.at(Condition::on(ActionLabel::R)).at(ActionLabel::Stop) ==
        doctest::Approx(1.0));
}

TEST_CASE("degenerate row always samples its action") {
  ConditionalPolicy p = user_policy_rows({{Condition::on(ActionLabel::R), {{ActionLabel::Q, 1.0}}}});
  RandomStream rng(1);
  for (int i = 0; i < 50; ++i)
    CHECK(sample_next(p, Condition::on(ActionLabel::R), rng) == ActionLabel::Q);
}

TEST_CASE("seeded sampling frequencies match the row") {
  ConditionalPolicy p = user_policy_rows(
      {{Condition::on(ActionLabel::R), {{ActionLabel::Q, 0.7}, {ActionLabel::F, 0.3}}}});
  RandomStream rng(42);
  int q = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i)
    if (sample_next(p, Condition::on(ActionLabel::R), rng) == ActionLabel::Q) ++q;
  double freq = static_cast<double>(q) / n;
  // 99% binomial interval around 0.7 at n=10000.
  CHECK(freq >= 0.68);
  CHECK(freq <= 0.72);
}

TEST_CASE("unknown condition errors") {
  ConditionalPolicy p = user_policy_rows({{Condition::on(ActionLabel::R), {{ActionLabel::Q, 1.0}}}});
  RandomStream rng(1);
  CHECK_THROWS_WITH_AS(sample_next(p, Condition::on(ActionLabel::A), rng),
                       doctest::Contains("unknown condition"), ConfigError);
}

TEST_CASE("sampling consumes exactly one draw") {
  ConditionalPolicy p = user_policy_rows(
      {{Condition::on(ActionLabel::R), {{ActionLabel::Q, 0.5}, {ActionLabel::F, 0.5}}}});
  RandomStream a(9), b(9);
  (void)sample_next(p, Condition::on(ActionLabel::R), a);
  (void)b.next_unit();
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rows as distributions: canonical order and alignment") {
  ConditionalPolicy p = user_policy_rows({
      {Condition::on(ActionLabel::R),
       {{ActionLabel::Q, 0.6}, {ActionLabel::F, 0.3}, {ActionLabel::Stop, 0.1}}},
      {Condition::on(ActionLabel::A),
       {{ActionLabel::Q, 0.2}, {ActionLabel::F, 0.5}, {ActionLabel::Stop, 0.3}}},
  });
  AlignedRows rows = policy_rows_as_distributions(
      p, {Condition::on(ActionLabel::R), Condition::on(ActionLabel::A)});
  REQUIRE(rows.rows.size() == 2);
  CHECK(rows.outcome_labels == std::vector<std::string>{"Q", "F", "STOP"});
  CHECK(rows.rows[0].first == Condition::on(ActionLabel::A));  // alphabetical
  CHECK(rows.rows[1].first == Condition::on(ActionLabel::R));
  CHECK(rows.rows[1].second == std::vector<double>{0.6, 0.3, 0.1});
}

TEST_CASE("rows as distributions: empty subset and missing condition") {
  ConditionalPolicy p = user_policy_rows({{Condition::on(ActionLabel::R), {{ActionLabel::Q, 1.0}}}});
  CHECK(policy_rows_as_distributions(p, {}).rows.empty());
  CHECK_THROWS_WITH_AS(policy_rows_as_distributions(p, {Condition::on(ActionLabel::A)}),
                       doctest::Contains("requested condition missing"), ValidationError);
}

TEST_CASE("union alignment zero-fills missing outcomes") {
  ConditionalPolicy narrow = user_policy_rows({{Condition::on(ActionLabel::R), {{ActionLabel::Q, 1.0}}}});
  narrow.vocabulary = {ActionLabel::Q};
  ConditionalPolicy wide = user_policy_rows(
      {{Condition::on(ActionLabel::R),
        {{ActionLabel::Q, 0.5}, {ActionLabel::F, 0.25}, {ActionLabel::Stop, 0.25}}}});
  auto [a, b] = align_policies(narrow, wide, {Condition::on(ActionLabel::R)});
  CHECK(a.outcome_labels == std::vector<std::string>{"Q", "F", "STOP"});
  CHECK(a.rows[0].second == std::vector<double>{1.0, 0.0, 0.0});
  CHECK(b.rows[0].second == std::vector<double>{0.5, 0.25, 0.25});
}

TEST_CASE("normalization is enforced on every construction path") {
  ConditionalPolicy p;
  p.side = Speaker::User;
  p.vocabulary = side_outcomes(Speaker::User);
  p.table[Condition::on(ActionLabel::R)] = {{ActionLabel::Q, 0.6}, {ActionLabel::F, 0.3}};
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("sums to"), ValidationError);
  p.table[Condition::on(ActionLabel::R)] = {{ActionLabel::Q, 1.4}, {ActionLabel::F, -0.4}};
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("negative"), ValidationError);
}

TEST_CASE("smoothing monotonicity: rows move toward uniform") {
  Corpus c = r_transitions();
  double prev_l1 = -1.0;
  for (double s : {0.0, 0.5, 1.0, 2.0, 5.0, 20.0}) {
    ConditionalPolicy p = estimate_policy(c, Speaker::User, {s, false});
    const PolicyRow& row = p.table.at(Condition::on(ActionLabel::R));
    double l1 = 0.0;
    for (const auto& [a, v] : row) l1 += std::abs(v - 1.0 / 3.0);
    if (prev_l1 >= 0.0) CHECK(l1 <= prev_l1 + 1e-12);
    prev_l1 = l1;
  }
}

TEST_CASE("policy file round trip") {
  TempDir dir("policy");
  ConditionalPolicy p = estimate_policy(r_transitions(), Speaker::User, {0.5, false});
  auto file = dir.path() / "user.json";
  save_policy(p, file);
  ConditionalPolicy back = load_policy(file);
  CHECK(back.side == p.side);
  CHECK(back.table.size() == p.table.size());
  for (const auto& [cond, row] : p.table)
    for (const auto& [a, v] : row)
      CHECK(back.table.at(cond).at(a) == doctest::Approx(v).epsilon(1e-12));
  CHECK(back.condition_weights == p.condition_weights);
}

TEST_CASE("policy file rows must normalize on load") {
  TempDir dir("policy");
  auto file = dir.path() / "bad.json";
  write_file(file, R"({"side":"user","rows":{"R":{"Q":0.5,"F":0.3}}})");
  CHECK_THROWS_AS(load_policy(file), ValidationError);
}

TEST_CASE("pair validation requires a START row for the opener") {
  ConditionalPolicy user = user_policy_rows({{Condition::on(ActionLabel::R), {{ActionLabel::Q, 1.0}}}});
  ConditionalPolicy agent;
  agent.side = Speaker::Agent;
  agent.vocabulary = side_outcomes(Speaker::Agent);
  agent.table[Condition::on(ActionLabel::Q)] = {{ActionLabel::R, 1.0}};
  PolicyPair pair{agent, user, Speaker::User};
  CHECK_THROWS_WITH_AS(pair.validate(), doctest::Contains("START"), ConfigError);
}
