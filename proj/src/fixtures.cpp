#include "simobj/fixtures.hpp"

#include "json.hpp"
#include "simobj/behavior.hpp"
#include "simobj/policy.hpp"
#include "simobj/simulate.hpp"
#include "simobj/util.hpp"

namespace simobj {

using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kPolicyTag = 0x9011CE;
constexpr std::uint64_t kCorpusTag = 0xC0B905;
constexpr std::uint64_t kRefTag = 0x9EF123;

constexpr std::size_t kMainCorpusSize = 10000;
constexpr std::size_t kRefCorpusSize = 300;

double in_range(RandomStream& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.next_unit();
}

// A row is a Stop mass plus a split of the remainder between the side's two
// actions; `ratio` is the share going to the row's primary action.
struct RowShape {
  double stop;
  double ratio;
};

// Population archetypes. The five stand-in populations differ in kind, the
// way corpora from unrelated domains do: dialogue length, request/answer
// balance, and feedback appetite all vary. Seeded jitter is layered on top.
// Primary actions: Q for user rows, R for agent row Q, A for agent row F.
struct PopulationShape {
  RowShape user_r;   // user after a request
  RowShape user_a;   // user after an answer
  RowShape agent_q;  // agent after a query
  RowShape agent_f;  // agent after feedback
};

constexpr PopulationShape kShapes[5] = {
    // long slot-filling exchanges: the agent keeps requesting, the user keeps answering
    {{0.13, 0.90}, {0.20, 0.50}, {0.00, 0.85}, {0.02, 0.50}},
    // task-focused lookups of medium length, feedback mostly closes the dialogue
    {{0.20, 0.70}, {0.45, 0.15}, {0.00, 0.50}, {0.02, 0.80}},
    // exploratory browsing: feedback-dominated turns against an answering agent
    {{0.15, 0.15}, {0.25, 0.10}, {0.00, 0.25}, {0.03, 0.60}},
    // single-shot lookups: immediate answers, the user leaves almost at once
    {{0.40, 0.50}, {0.60, 0.30}, {0.00, 0.10}, {0.01, 0.90}},
    // chatty mixed-initiative sessions that rarely settle
    {{0.13, 0.45}, {0.17, 0.55}, {0.00, 0.60}, {0.03, 0.25}},
};

// Stop jitter is proportional so the agent's zero-Stop query row stays
// exactly zero: an agent always responds to a query.
PolicyRow shaped_row(RowShape shape, ActionLabel primary, ActionLabel secondary,
                     RandomStream& rng, double stop_floor) {
  double stop = shape.stop * (1.0 + in_range(rng, -0.15, 0.15));
  if (stop < stop_floor) stop = stop_floor;
  double ratio = shape.ratio + in_range(rng, -0.05, 0.05);
  ratio = std::min(0.98, std::max(0.02, ratio));
  double first = (1.0 - stop) * ratio;
  return {{primary, first}, {secondary, 1.0 - stop - first}, {ActionLabel::Stop, stop}};
}

// User rows keep at least 0.12 Stop mass, which holds the chance of a
// dialogue surviving to the 100-turn cap below 1%.
PolicyPair draw_policy_pair(std::uint64_t seed, std::uint64_t pop_index) {
  RandomStream rng = RandomStream::derive(seed, {kPolicyTag, pop_index});
  const PopulationShape& shape = kShapes[(pop_index - 1) % 5];

  ConditionalPolicy user;
  user.side = Speaker::User;
  user.opener = Speaker::User;
  user.vocabulary = side_outcomes(Speaker::User);
  user.table[Condition::start()] = {{ActionLabel::Q, 1.0}};
  user.table[Condition::on(ActionLabel::R)] =
      shaped_row(shape.user_r, ActionLabel::Q, ActionLabel::F, rng, 0.12);
  user.table[Condition::on(ActionLabel::A)] =
      shaped_row(shape.user_a, ActionLabel::Q, ActionLabel::F, rng, 0.12);

  ConditionalPolicy agent;
  agent.side = Speaker::Agent;
  agent.opener = Speaker::User;
  agent.vocabulary = side_outcomes(Speaker::Agent);
  agent.table[Condition::on(ActionLabel::Q)] =
      shaped_row(shape.agent_q, ActionLabel::R, ActionLabel::A, rng, 0.0);
  agent.table[Condition::on(ActionLabel::F)] =
      shaped_row(shape.agent_f, ActionLabel::A, ActionLabel::R, rng, 0.0);

  PolicyPair pair{std::move(agent), std::move(user), Speaker::User};
  pair.validate();
  return pair;
}

ConditionalPolicy fixed_user_policy(std::initializer_list<std::pair<Condition, PolicyRow>> rows) {
  ConditionalPolicy p;
  p.side = Speaker::User;
  p.opener = Speaker::User;
  p.vocabulary = side_outcomes(Speaker::User);
  for (const auto& [cond, row] : rows) p.table[cond] = row;
  p.validate();
  return p;
}

ConditionalPolicy fixed_agent_policy(std::initializer_list<std::pair<Condition, PolicyRow>> rows) {
  ConditionalPolicy p;
  p.side = Speaker::Agent;
  p.opener = Speaker::User;
  p.vocabulary = side_outcomes(Speaker::Agent);
  for (const auto& [cond, row] : rows) p.table[cond] = row;
  p.validate();
  return p;
}

void save_user_model(const UserModel& m, const std::filesystem::path& path) {
  json j;
  j["name"] = m.name;
  j["patience"] = m.patience;
  j["inclination"] = m.inclination;
  write_file(path, j.dump(2) + "\n");
}

struct PopulationSpec {
  std::string name;
  PolicyPair pair;
  UserModel model;
};

void write_population(const PopulationSpec& spec, const std::filesystem::path& outdir,
                      std::uint64_t seed, std::uint64_t pop_index) {
  SimulationConfig cfg;
  cfg.n_dialogues = kMainCorpusSize;
  cfg.max_turns = 100;
  cfg.master_seed = seed;
  cfg.user_model = spec.model;
  cfg.id_prefix = spec.name;

  SimulationBatch main_batch = generate_batch(spec.pair, cfg, {kCorpusTag, pop_index});
  save_corpus(main_batch.dialogues, outdir / (spec.name + ".jsonl"));
  main_batch.provenance.agent_policy_id = spec.name + ".agent.json";
  main_batch.provenance.user_policy_id = spec.name + ".user.json";
  save_provenance(main_batch.provenance, outdir / (spec.name + ".jsonl.provenance.json"));

  cfg.n_dialogues = kRefCorpusSize;
  SimulationBatch ref_batch = generate_batch(spec.pair, cfg, {kRefTag, pop_index});
  save_corpus(ref_batch.dialogues, outdir / (spec.name + ".ref.jsonl"));
  ref_batch.provenance.agent_policy_id = spec.name + ".agent.json";
  ref_batch.provenance.user_policy_id = spec.name + ".user.json";
  save_provenance(ref_batch.provenance, outdir / (spec.name + ".ref.jsonl.provenance.json"));

  // Stored user policy carries the empirical condition counts of the big
  // corpus, used by reference-frequency divergence weighting.
  ConditionalPolicy user = spec.pair.user;
  user.condition_weights =
      estimate_policy(main_batch.dialogues, Speaker::User).condition_weights;
  save_policy(user, outdir / (spec.name + ".user.json"));
  save_policy(spec.pair.agent, outdir / (spec.name + ".agent.json"));
  save_user_model(spec.model, outdir / (spec.name + ".user_model.json"));
}

json population_entry(const std::string& name) {
  json p;
  p["name"] = name;
  p["agent_policy"] = name + ".agent.json";
  p["user_policy"] = name + ".user.json";
  p["user_model"] = name + ".user_model.json";
  p["corpus"] = name + ".ref.jsonl";
  return p;
}

void write_config(const std::vector<std::string>& names, std::uint64_t seed,
                  const std::filesystem::path& path) {
  json j;
  json pops = json::array();
  for (const std::string& n : names) pops.push_back(population_entry(n));
  j["populations"] = std::move(pops);
  j["n_dialogues"] = 500;
  j["n_repetitions"] = 10;
  j["max_turns"] = 100;
  j["seed"] = seed;
  j["tie_tolerance"] = 0.005;
  j["epsilon"] = 0.05;
  j["labeling"] = json{{"mode", "threshold"}, {"tau", 0.5}};
  j["jsd_weighting"] = "reference";
  j["rouge_aggregation"] = "mean";
  j["enrich_reference_labels"] = true;
  write_file(path, j.dump(2) + "\n");
}

}  // namespace

FixtureSummary bootstrap_fixtures(const std::filesystem::path& outdir, std::uint64_t seed) {
  std::filesystem::create_directories(outdir);
  FixtureSummary summary;

  auto presets = personality_presets();
  for (std::size_t i = 0; i < 5; ++i) {
    PopulationSpec spec;
    spec.name = "pop" + std::to_string(i + 1);
    spec.pair = draw_policy_pair(seed, i + 1);
    spec.model = presets[i].second;
    write_population(spec, outdir, seed, i + 1);
    summary.populations.push_back(spec.name);
  }

  // Divergence fixture: policytwin shares divref's dialogue policy but not
  // its personality; personatwin shares the personality but not the policy.
  ConditionalPolicy shared_user = fixed_user_policy({
      {Condition::start(), {{ActionLabel::Q, 1.0}}},
      {Condition::on(ActionLabel::R),
       {{ActionLabel::Q, 0.8}, {ActionLabel::F, 0.05}, {ActionLabel::Stop, 0.15}}},
      {Condition::on(ActionLabel::A),
       {{ActionLabel::Q, 0.1}, {ActionLabel::F, 0.7}, {ActionLabel::Stop, 0.2}}},
  });
  ConditionalPolicy other_user = fixed_user_policy({
      {Condition::start(), {{ActionLabel::Q, 1.0}}},
      {Condition::on(ActionLabel::R),
       {{ActionLabel::Q, 0.25}, {ActionLabel::F, 0.5}, {ActionLabel::Stop, 0.25}}},
      {Condition::on(ActionLabel::A),
       {{ActionLabel::Q, 0.5}, {ActionLabel::F, 0.15}, {ActionLabel::Stop, 0.35}}},
  });
  ConditionalPolicy shared_agent = fixed_agent_policy({
      {Condition::on(ActionLabel::Q), {{ActionLabel::R, 0.45}, {ActionLabel::A, 0.55}}},
      {Condition::on(ActionLabel::F), {{ActionLabel::R, 0.3}, {ActionLabel::A, 0.7}}},
  });

  std::vector<PopulationSpec> divergence = {
      {"divref", PolicyPair{shared_agent, shared_user, Speaker::User}, preset("U5")},
      {"policytwin", PolicyPair{shared_agent, shared_user, Speaker::User}, preset("U1")},
      {"personatwin", PolicyPair{shared_agent, other_user, Speaker::User}, preset("U5")},
  };
  for (std::size_t i = 0; i < divergence.size(); ++i) {
    PopulationSpec spec = divergence[i];
    spec.pair.validate();

    SimulationConfig cfg;
    cfg.n_dialogues = kRefCorpusSize;
    cfg.max_turns = 100;
    cfg.master_seed = seed;
    cfg.user_model = spec.model;
    cfg.id_prefix = spec.name;
    SimulationBatch batch = generate_batch(spec.pair, cfg, {kRefTag, 100 + i});
    save_corpus(batch.dialogues, outdir / (spec.name + ".ref.jsonl"));
    batch.provenance.agent_policy_id = spec.name + ".agent.json";
    batch.provenance.user_policy_id = spec.name + ".user.json";
    save_provenance(batch.provenance, outdir / (spec.name + ".ref.jsonl.provenance.json"));

    ConditionalPolicy user = spec.pair.user;
    user.condition_weights =
        estimate_policy(batch.dialogues, Speaker::User).condition_weights;
    save_policy(user, outdir / (spec.name + ".user.json"));
    save_policy(spec.pair.agent, outdir / (spec.name + ".agent.json"));
    save_user_model(spec.model, outdir / (spec.name + ".user_model.json"));
  }

  summary.minibench_config = outdir / "minibench.cfg";
  write_config(summary.populations, seed, summary.minibench_config);
  summary.divergence_config = outdir / "divergence.cfg";
  write_config({"divref", "policytwin", "personatwin"}, seed, summary.divergence_config);
  return summary;
}

}  // namespace simobj
