#pragma once

// Synthetic dialogue generation: alternate samples from an agent policy and
// a user policy until either side draws Stop or the length cap is hit, then
// label the outcome. Batches derive one stream per dialogue index from the
// master seed, so serial and parallel generation produce identical bytes.

#include <cstdint>
#include <string>
#include <vector>

#include "simobj/behavior.hpp"
#include "simobj/corpus.hpp"
#include "simobj/policy.hpp"
#include "simobj/rng.hpp"

namespace simobj {

struct SimulationConfig {
  std::size_t n_dialogues = 500;
  std::size_t max_turns = 100;  // cap on non-Stop turns, >= 2
  std::uint64_t master_seed = 42;
  OutcomeModel outcome;
  UserModel user_model;
  std::string id_prefix = "sim";

  void validate() const;  // ConfigError
};

struct BatchProvenance {
  std::string agent_policy_id;
  std::string user_policy_id;
  std::string user_model_name;
  std::uint64_t master_seed = 0;
  std::size_t n_dialogues = 0;
  std::size_t max_turns = 0;
  std::size_t truncated_count = 0;
  std::vector<std::uint64_t> stream_path;  // indices prefixed to the per-dialogue index

  double truncation_rate() const {
    return n_dialogues == 0 ? 0.0 : static_cast<double>(truncated_count) / n_dialogues;
  }
};

struct SimulationBatch {
  Corpus dialogues;
  BatchProvenance provenance;
};

// One dialogue from an already-positioned stream. The opener samples from
// its START row; each side then samples conditioned on the partner's last
// action. Hitting max_turns appends a Stop for the side that would act next
// and marks the dialogue truncated. The success label comes from the
// dialogue's own length and final actions; a degenerate dialogue in which a
// side never acts is labeled unsuccessful.
Dialogue generate_dialogue(const PolicyPair& pp, const SimulationConfig& cfg,
                           RandomStream& rng, std::string id);

// n_dialogues dialogues, stream per dialogue derived from
// (master_seed, stream_path..., dialogue index).
SimulationBatch generate_batch(const PolicyPair& pp, const SimulationConfig& cfg,
                               std::vector<std::uint64_t> stream_path = {});

// Provenance sidecar written next to generated corpora.
void save_provenance(const BatchProvenance& p, const std::filesystem::path& path);

}  // namespace simobj
