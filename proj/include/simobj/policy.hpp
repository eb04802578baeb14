#pragma once

// Conditional action policies: estimation from corpora, file format,
// sampling, and row alignment for divergence computations.
//
// A policy is order-1 Markov: the next action of one side depends only on
// the partner's immediately preceding action (or on the start of the
// dialogue). Termination is an absorbing Stop outcome in each row.
// Policies are immutable after construction; sampling takes an external
// random stream.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simobj/corpus.hpp"
#include "simobj/rng.hpp"

namespace simobj {

// Conditioning context for the next action: the partner's last action, or
// Start at the opening of a dialogue. Canonical order: START first, then
// labels alphabetically.
class Condition {
 public:
  static Condition start() { return Condition(std::nullopt); }
  static Condition on(ActionLabel a) { return Condition(a); }
  static std::optional<Condition> parse(const std::string& s);

  bool is_start() const { return !action_.has_value(); }
  ActionLabel action() const { return *action_; }
  std::string str() const;

  bool operator==(const Condition&) const = default;
  bool operator<(const Condition& o) const;

 private:
  explicit Condition(std::optional<ActionLabel> a) : action_(a) {}
  std::optional<ActionLabel> action_;
};

using PolicyRow = std::map<ActionLabel, double>;

struct ConditionalPolicy {
  Speaker side = Speaker::User;
  std::optional<Speaker> opener;  // which side opens dialogues, when known
  std::map<Condition, PolicyRow> table;
  // Action set the rows draw from (the side's labels plus Stop, or a subset
  // for hand-written policies). Kept in canonical outcome order.
  std::vector<ActionLabel> vocabulary;
  // Empirical count of each condition, filled by estimation; used as the
  // reference-frequency weights when aggregating per-condition divergences.
  std::map<Condition, double> condition_weights;

  // Rows sum to 1 within 1e-9, entries >= 0, outcomes on-side. Throws.
  void validate() const;
};

struct PolicyPair {
  ConditionalPolicy agent;
  ConditionalPolicy user;
  Speaker opener = Speaker::User;

  const ConditionalPolicy& policy_for(Speaker s) const {
    return s == Speaker::User ? user : agent;
  }
  // Sides correct, both valid, opener's policy has a START row. Throws.
  void validate() const;
};

// Canonical outcome order for a side: Q, F, Stop (user) or R, A, Stop (agent).
std::vector<ActionLabel> side_outcomes(Speaker side);

struct EstimateOptions {
  double smoothing = 0.0;  // additive pseudo-count, >= 0
  // A dialogue that ends without an explicit Stop always credits a
  // last-action -> Stop transition to the side that would have acted next.
  // When this flag is set, the side that issued the final turn additionally
  // gets a Stop count on the condition it responded to.
  bool credit_final_responder_stop = false;
};

// row(cond)[a] = (count(cond -> a) + smoothing) / (total(cond) + smoothing * |outcomes|).
// Throws ConfigError on negative smoothing, ValidationError when the corpus
// holds no observations for the side.
ConditionalPolicy estimate_policy(const Corpus& c, Speaker side,
                                  const EstimateOptions& opt = {});

// One draw from the stream; throws ConfigError on an unknown condition.
ActionLabel sample_next(const ConditionalPolicy& p, const Condition& cond, RandomStream& rng);

// Rows as aligned probability vectors, in canonical condition order, over a
// shared outcome ordering. The adapter feeding the metrics layer.
struct AlignedRows {
  std::vector<std::string> outcome_labels;
  std::vector<std::pair<Condition, std::vector<double>>> rows;
};

AlignedRows policy_rows_as_distributions(const ConditionalPolicy& p,
                                         const std::vector<Condition>& conditions);

// Same conditions from two policies, aligned on the union of their
// vocabularies with zero-filled entries.
std::pair<AlignedRows, AlignedRows> align_policies(const ConditionalPolicy& a,
                                                   const ConditionalPolicy& b,
                                                   const std::vector<Condition>& conditions);

// Policy file format:
//   {"side": "user"|"agent", "opener": "user"|"agent",
//    "rows": {"<condition>": {"<action>": <prob>, ...}, ...},
//    "condition_weights": {"<condition>": <count>, ...}}   (optional)
// Rows must pass normalization on load.
ConditionalPolicy load_policy(const std::filesystem::path& path);
void save_policy(const ConditionalPolicy& p, const std::filesystem::path& path);

}  // namespace simobj
