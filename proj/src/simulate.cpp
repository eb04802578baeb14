#include "simobj/simulate.hpp"

#include <cstdio>

#include "json.hpp"
#include "simobj/util.hpp"

namespace simobj {

using json = nlohmann::ordered_json;

void SimulationConfig::validate() const {
  if (n_dialogues < 1) throw ConfigError("n_dialogues must be >= 1");
  if (max_turns < 2) throw ConfigError("max_turns must be >= 2");
  outcome.validate();
  user_model.validate();
}

Dialogue generate_dialogue(const PolicyPair& pp, const SimulationConfig& cfg,
                           RandomStream& rng, std::string id) {
  Dialogue d;
  d.id = std::move(id);

  Speaker side = pp.opener;
  Condition cond = Condition::start();
  std::uint32_t index = 0;
  std::size_t non_stop = 0;
  while (true) {
    ActionLabel a = sample_next(pp.policy_for(side), cond, rng);
    if (a == ActionLabel::Stop) {
      d.turns.push_back(Turn{side, ActionLabel::Stop, index++});
      break;
    }
    d.turns.push_back(Turn{side, a, index++});
    ++non_stop;
    if (non_stop == cfg.max_turns) {
      d.turns.push_back(Turn{opposite(side), ActionLabel::Stop, index++});
      d.truncated = true;
      break;
    }
    cond = Condition::on(a);
    side = opposite(side);
  }

  if (auto feats = extract_features(d)) {
    double f = success_probability(cfg.user_model, *feats, cfg.outcome);
    d.success = assign_label(f, cfg.outcome, &rng);
  } else {
    // A side never acted (immediate Stop); nothing to succeed at.
    d.success = false;
  }
  return d;
}

SimulationBatch generate_batch(const PolicyPair& pp, const SimulationConfig& cfg,
                               std::vector<std::uint64_t> stream_path) {
  cfg.validate();
  pp.validate();

  SimulationBatch batch;
  batch.dialogues.name = cfg.id_prefix;
  batch.dialogues.dialogues.reserve(cfg.n_dialogues);
  batch.provenance.master_seed = cfg.master_seed;
  batch.provenance.n_dialogues = cfg.n_dialogues;
  batch.provenance.max_turns = cfg.max_turns;
  batch.provenance.user_model_name = cfg.user_model.name;
  batch.provenance.stream_path = stream_path;

  std::vector<std::uint64_t> path = std::move(stream_path);
  path.push_back(0);
  for (std::size_t i = 0; i < cfg.n_dialogues; ++i) {
    path.back() = i;
    RandomStream rng = RandomStream::derive(cfg.master_seed, path);
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%s-%05zu", cfg.id_prefix.c_str(), i);
    Dialogue d = generate_dialogue(pp, cfg, rng, idbuf);
    validate_dialogue(d, d.id);
    if (d.truncated) ++batch.provenance.truncated_count;
    batch.dialogues.dialogues.push_back(std::move(d));
  }
  return batch;
}

void save_provenance(const BatchProvenance& p, const std::filesystem::path& path) {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["agent_policy"] = p.agent_policy_id;
  j["user_policy"] = p.user_policy_id;
  j["user_model"] = p.user_model_name;
  j["master_seed"] = p.master_seed;
  j["stream_path"] = p.stream_path;
  j["n_dialogues"] = p.n_dialogues;
  j["max_turns"] = p.max_turns;
  j["truncated_count"] = p.truncated_count;
  j["truncation_rate"] = p.truncation_rate();
  write_file(path, j.dump(2) + "\n");
}

}  // namespace simobj
