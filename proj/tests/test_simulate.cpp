#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "simobj/simulate.hpp"
#include "test_util.hpp"

using namespace simobj;
using namespace simobj::testing;

namespace {

ConditionalPolicy user_policy(std::initializer_list<std::pair<Condition, PolicyRow>> rows) {
  ConditionalPolicy p;
  p.side = Speaker::User;
  p.opener = Speaker::User;
  p.vocabulary = side_outcomes(Speaker::User);
  for (const auto& [c, r] : rows) p.table[c] = r;
  p.validate();
  return p;
}

ConditionalPolicy agent_policy(std::initializer_list<std::pair<Condition, PolicyRow>> rows) {
  ConditionalPolicy p;
  p.side = Speaker::Agent;
  p.vocabulary = side_outcomes(Speaker::Agent);
  for (const auto& [c, r] : rows) p.table[c] = r;
  p.validate();
  return p;
}

// A pair with nontrivial branching and Stop mass on both sides.
PolicyPair mixed_pair() {
  ConditionalPolicy user = user_policy({
      {Condition::start(), {{ActionLabel::Q, 1.0}}},
      {Condition::on(ActionLabel::R),
       {{ActionLabel::Q, 0.65}, {ActionLabel::F, 0.15}, {ActionLabel::Stop, 0.2}}},
      {Condition::on(ActionLabel::A),
       {{ActionLabel::Q, 0.2}, {ActionLabel::F, 0.5}, {ActionLabel::Stop, 0.3}}},
  });
  ConditionalPolicy agent = agent_policy({
      {Condition::on(ActionLabel::Q),
       {{ActionLabel::R, 0.5}, {ActionLabel::A, 0.47}, {ActionLabel::Stop, 0.03}}},
      {Condition::on(ActionLabel::F),
       {{ActionLabel::R, 0.25}, {ActionLabel::A, 0.7}, {ActionLabel::Stop, 0.05}}},
  });
  return PolicyPair{agent, user, Speaker::User};
}

// Expected non-Stop turn count of the generation chain, by value iteration
// over E[turns | side about to act, condition]. Independent of the sampling
// path the generator takes.
double expected_absorption_turns(const PolicyPair& pp) {
  std::map<std::pair<Speaker, Condition>, double> e;
  auto states = [&] {
    std::vector<std::pair<Speaker, Condition>> v;
    for (const auto& [cond, _] : pp.user.table) v.emplace_back(Speaker::User, cond);
    for (const auto& [cond, _] : pp.agent.table) v.emplace_back(Speaker::Agent, cond);
    return v;
  }();
  for (const auto& s : states) e[s] = 0.0;
  for (int iter = 0; iter < 100000; ++iter) {
    double delta = 0.0;
    for (const auto& [state, _] : e) {
      const auto& [side, cond] = state;
      const PolicyRow& row = pp.policy_for(side).table.at(cond);
      double v = 0.0;
      for (const auto& [a, prob] : row) {
        if (a == ActionLabel::Stop) continue;
        auto next = std::make_pair(opposite(side), Condition::on(a));
        double cont = e.count(next) ? e.at(next) : 0.0;
        v += prob * (1.0 + cont);
      }
      delta = std::max(delta, std::abs(v - e[state]));
      e[state] = v;
    }
    if (delta < 1e-13) break;
  }
  return e.at({pp.opener, Condition::start()});
}

}  // namespace

TEST_CASE("fully deterministic chain gives [Q, A] with l = 2") {
  ConditionalPolicy user = user_policy({
      {Condition::start(), {{ActionLabel::Q, 1.0}}},
      {Condition::on(ActionLabel::A), {{ActionLabel::Stop, 1.0}}},
  });
  ConditionalPolicy agent = agent_policy({
      {Condition::on(ActionLabel::Q), {{ActionLabel::A, 1.0}}},
  });
  PolicyPair pair{agent, user, Speaker::User};
  SimulationConfig cfg;
  cfg.user_model = preset("U5");
  RandomStream rng(1);
  Dialogue d = generate_dialogue(pair, cfg, rng, "d");
  CHECK(d.length() == 2);
  REQUIRE(d.turns.size() == 3);
  CHECK(d.turns[0].action == ActionLabel::Q);
  CHECK(d.turns[1].action == ActionLabel::A);
  CHECK(d.turns[2].action == ActionLabel::Stop);
  CHECK(d.turns[2].speaker == Speaker::User);
  CHECK_FALSE(d.truncated);
  CHECK(d.success.has_value());
}

TEST_CASE("no Stop mass anywhere hits the cap and is flagged") {
  ConditionalPolicy user = user_policy({
      {Condition::start(), {{ActionLabel::Q, 1.0}}},
      {Condition::on(ActionLabel::R), {{ActionLabel::Q, 1.0}}},
  });
  ConditionalPolicy agent = agent_policy({
      {Condition::on(ActionLabel::Q), {{ActionLabel::R, 1.0}}},
  });
  PolicyPair pair{agent, user, Speaker::User};
  SimulationConfig cfg;
  cfg.max_turns = 6;
  cfg.user_model = preset("U5");
  RandomStream rng(1);
  Dialogue d = generate_dialogue(pair, cfg, rng, "d");
  CHECK(d.length() == 6);
  CHECK(d.truncated);
  CHECK(d.turns.back().action == ActionLabel::Stop);
  validate_dialogue(d, "capped");
}

TEST_CASE("missing policy row surfaces as an error") {
  ConditionalPolicy user = user_policy({{Condition::start(), {{ActionLabel::Q, 1.0}}}});
  ConditionalPolicy agent = agent_policy({
      {Condition::on(ActionLabel::Q), {{ActionLabel::A, 1.0}}},
  });
  PolicyPair pair{agent, user, Speaker::User};
  SimulationConfig cfg;
  cfg.user_model = preset("U5");
  RandomStream rng(1);
  CHECK_THROWS_AS(generate_dialogue(pair, cfg, rng, "d"), ConfigError);
}

TEST_CASE("batches are reproducible and seed-sensitive") {
  PolicyPair pair = mixed_pair();
  SimulationConfig cfg;
  cfg.n_dialogues = 200;
  cfg.master_seed = 42;
  cfg.user_model = preset("U3");
  SimulationBatch a = generate_batch(pair, cfg);
  SimulationBatch b = generate_batch(pair, cfg);
  REQUIRE(a.dialogues.size() == b.dialogues.size());
  for (std::size_t i = 0; i < a.dialogues.size(); ++i)
    CHECK(a.dialogues.dialogues[i] == b.dialogues.dialogues[i]);

  cfg.master_seed = 43;
  SimulationBatch c = generate_batch(pair, cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.dialogues.size(); ++i)
    if (!(a.dialogues.dialogues[i] == c.dialogues.dialogues[i])) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("batch assembly is order-independent: per-dialogue streams") {
  PolicyPair pair = mixed_pair();
  SimulationConfig cfg;
  cfg.n_dialogues = 50;
  cfg.master_seed = 7;
  cfg.user_model = preset("U2");
  SimulationBatch batch = generate_batch(pair, cfg, {3, 1});
  // Regenerate dialogue 17 in isolation from its derived stream.
  RandomStream rng = RandomStream::derive(7, {3, 1, 17});
  Dialogue d = generate_dialogue(pair, cfg, rng, batch.dialogues.dialogues[17].id);
  CHECK(d == batch.dialogues.dialogues[17]);
}

TEST_CASE("every generated dialogue satisfies the corpus invariants") {
  PolicyPair pair = mixed_pair();
  SimulationConfig cfg;
  cfg.n_dialogues = 500;
  cfg.user_model = preset("U1");
  SimulationBatch batch = generate_batch(pair, cfg);
  CHECK(batch.dialogues.size() == 500);
  for (const Dialogue& d : batch.dialogues.dialogues) {
    validate_dialogue(d, d.id);
    CHECK(d.success.has_value());
    CHECK(d.turns.back().action == ActionLabel::Stop);
  }
}

TEST_CASE("generated frequencies converge to the policy rows") {
  PolicyPair pair = mixed_pair();
  SimulationConfig cfg;
  cfg.n_dialogues = 10000;
  cfg.master_seed = 2024;
  cfg.user_model = preset("U5");
  SimulationBatch batch = generate_batch(pair, cfg);

  ConditionalPolicy est_user = estimate_policy(batch.dialogues, Speaker::User);
  for (const auto& [cond, row] : pair.user.table)
    for (const auto& [a, p] : row)
      CHECK(std::abs(est_user.table.at(cond).at(a) - p) <= 0.02);

  ConditionalPolicy est_agent = estimate_policy(batch.dialogues, Speaker::Agent);
  for (const auto& [cond, row] : pair.agent.table)
    for (const auto& [a, p] : row)
      CHECK(std::abs(est_agent.table.at(cond).at(a) - p) <= 0.02);
}

TEST_CASE("mean length matches the chain's expected absorption time") {
  PolicyPair pair = mixed_pair();
  double expected = expected_absorption_turns(pair);
  SimulationConfig cfg;
  cfg.n_dialogues = 10000;
  cfg.master_seed = 5;
  cfg.user_model = preset("U5");
  SimulationBatch batch = generate_batch(pair, cfg);
  CorpusStats stats = corpus_stats(batch.dialogues);
  CHECK(std::abs(stats.mean_length - expected) <= 0.5);
  CHECK(batch.provenance.truncation_rate() < 0.01);
}

TEST_CASE("degenerate opener Stop yields a labeled failure") {
  ConditionalPolicy user = user_policy({{Condition::start(), {{ActionLabel::Stop, 1.0}}}});
  ConditionalPolicy agent = agent_policy({
      {Condition::on(ActionLabel::Q), {{ActionLabel::A, 1.0}}},
  });
  PolicyPair pair{agent, user, Speaker::User};
  SimulationConfig cfg;
  cfg.user_model = preset("U5");
  RandomStream rng(1);
  Dialogue d = generate_dialogue(pair, cfg, rng, "d");
  REQUIRE(d.success.has_value());
  CHECK_FALSE(*d.success);
  validate_dialogue(d, "degenerate");
}

TEST_CASE("config bounds") {
  SimulationConfig cfg;
  cfg.user_model = preset("U5");
  cfg.max_turns = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.max_turns = 2;
  cfg.n_dialogues = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
