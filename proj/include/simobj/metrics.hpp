#pragma once

// Objective measures and ranking machinery: Jensen-Shannon divergence over
// aligned distributions and over whole policies, ROUGE-L between action
// sequences with pairwise aggregation across corpora, success rate,
// absolute performance difference, simulator ranking with relation marks,
// tie-aware Kendall's tau, and a seeded permutation test on success
// proportions.
//
// All computations are pure. Pairwise aggregation sorts the score multiset
// before reducing, so results are exactly invariant to dialogue order.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simobj/corpus.hpp"
#include "simobj/policy.hpp"

namespace simobj {

struct Distribution {
  std::vector<std::string> labels;
  std::vector<double> probs;

  void validate() const;  // sizes match, entries >= 0, sums to 1 within 1e-9
};

// Base-2 by default, giving values in [0, 1]. 0*log(0) terms vanish.
// ValidationError on misaligned outcome sets.
double jsd(const Distribution& p, const Distribution& q, double log_base = 2.0);

enum class JsdWeighting { ReferenceFrequency, Uniform };

// Per-condition JSD over the partner-action conditions shared by both
// policies (START carries no conditioning agent action and is excluded),
// rows aligned on the union vocabulary. Reference-frequency weighting uses
// the reference policy's empirical condition counts (or the supplied ones);
// uniform weighting averages equally.
double policy_jsd(const ConditionalPolicy& ref, const ConditionalPolicy& sim,
                  JsdWeighting weighting,
                  const std::map<Condition, double>& ref_weights = {});

std::size_t lcs_length(std::span<const ActionLabel> a, std::span<const ActionLabel> b);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// Balanced F over non-Stop action sequences: recall against the reference,
// precision against the candidate. ValidationError on an empty sequence.
RougeScore rouge_l(const Dialogue& reference, const Dialogue& candidate);

enum class Aggregation { Mean, Median, Max };

Aggregation parse_aggregation(const std::string& s);  // ConfigError
const char* to_string(Aggregation a);

// Which side of the ROUGE-L score a pairwise aggregation consumes.
enum class RougeOrientation { F, Precision, Recall };

RougeOrientation parse_orientation(const std::string& s);  // ConfigError
const char* to_string(RougeOrientation o);

// rouge_l over the full ref x syn cross product, reduced with aggr.
double aggregate_pairwise(const Corpus& ref, const Corpus& syn,
                          Aggregation aggr = Aggregation::Mean,
                          RougeOrientation orientation = RougeOrientation::F);

// Mean of the stored binary labels; ValidationError when any dialogue is
// unlabeled or the corpus is empty.
double success_rate(const Corpus& c);

inline double abs_perf_diff(double m_ref, double m_sim) {
  double d = m_ref - m_sim;
  return d < 0 ? -d : d;
}

struct EpsilonThreshold {
  double epsilon = 0.0;  // >= 0
  bool accepts(double diff) const { return diff <= epsilon; }
};

enum class Direction { LowerBetter, HigherBetter };

// Relation to the next (worse) entry in a ranking.
enum class Relation { Strict, Weak, Equal, None };
const char* to_string(Relation r);

struct RankedEntry {
  std::string id;
  double mean = 0.0;
  double stddev = 0.0;
  Relation to_next = Relation::None;
};

struct RankedList {
  std::vector<RankedEntry> entries;  // best to worst
  Direction direction = Direction::LowerBetter;

  std::vector<std::string> ids_in_order() const;
};

struct ScoreStat {
  double mean = 0.0;
  double stddev = 0.0;
};

// Sorted by mean in the stated direction with a stable tie-break on the
// identifier. Adjacent entries are marked Equal on identical means, Weak
// when the gap is within tie_tolerance, Strict otherwise.
// ValidationError with fewer than two entries.
RankedList rank_simulators(const std::map<std::string, ScoreStat>& scores,
                           Direction direction, double tie_tolerance);

// Tau-b over the two orderings; entries joined by Equal marks share an
// average rank. ValidationError on mismatched simulator sets.
double kendall_tau(const RankedList& r1, const RankedList& r2);

struct SignificanceResult {
  double p_value = 1.0;
  bool reject = false;
};

// Two-sided permutation test on the difference of success proportions,
// Monte Carlo with n_resamples draws; p = (1 + #{T* >= T}) / (1 + n).
// Tests equality of proportions; reject iff p < alpha. Degenerate pooled
// samples (all labels identical) give p = 1 and no rejection.
SignificanceResult significance_test(std::span<const int> ref_labels,
                                     std::span<const int> sim_labels, double alpha,
                                     std::size_t n_resamples, std::uint64_t seed);

namespace detail {
// Rank positions 1..n per id; Equal-joined groups share the average rank.
std::map<std::string, double> tie_aware_ranks(const RankedList& r);
}  // namespace detail

}  // namespace simobj
