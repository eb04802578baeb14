#include "simobj/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "simobj/rng.hpp"
#include "simobj/util.hpp"

namespace simobj {

namespace {
constexpr double kSumTolerance = 1e-9;
}

void Distribution::validate() const {
  if (labels.size() != probs.size())
    throw ValidationError("distribution labels and probabilities differ in size");
  if (labels.empty()) throw ValidationError("empty distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ValidationError("negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance)
    throw ValidationError("distribution sums to " + fmt_full(sum) + ", expected 1");
}

double jsd(const Distribution& p, const Distribution& q, double log_base) {
  p.validate();
  q.validate();
  if (p.labels != q.labels) throw ValidationError("misaligned outcome sets");
  if (!(log_base > 1.0)) throw ConfigError("log base must exceed 1");

  const bool base2 = log_base == 2.0;
  const double log_of_base = std::log(log_base);
  auto log_b = [&](double x) { return base2 ? std::log2(x) : std::log(x) / log_of_base; };

  double acc = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    double pi = p.probs[i], qi = q.probs[i];
    double mi = 0.5 * (pi + qi);
    if (pi > 0.0) acc += 0.5 * pi * log_b(pi / mi);
    if (qi > 0.0) acc += 0.5 * qi * log_b(qi / mi);
  }
  return acc < 0.0 ? 0.0 : acc;  // clamp rounding residue
}

double policy_jsd(const ConditionalPolicy& ref, const ConditionalPolicy& sim,
                  JsdWeighting weighting, const std::map<Condition, double>& ref_weights) {
  if (ref.side != Speaker::User || sim.side != Speaker::User)
    throw ConfigError("policy divergence expects user-side policies");

  // Conditions are the partner actions shared by both policies. The START
  // row is excluded: it has no conditioning agent action.
  std::vector<Condition> shared;
  for (const auto& [cond, _] : ref.table)
    if (!cond.is_start() && sim.table.count(cond)) shared.push_back(cond);
  if (shared.empty()) throw ValidationError("no shared conditions");

  auto [ref_rows, sim_rows] = align_policies(ref, sim, shared);

  std::vector<double> weights;
  weights.reserve(shared.size());
  if (weighting == JsdWeighting::Uniform) {
    weights.assign(ref_rows.rows.size(), 1.0);
  } else {
    const auto& source = ref_weights.empty() ? ref.condition_weights : ref_weights;
    if (source.empty())
      throw ConfigError("reference-frequency weighting needs condition weights");
    for (const auto& [cond, _] : ref_rows.rows) {
      auto it = source.find(cond);
      weights.push_back(it == source.end() ? 0.0 : it->second);
    }
  }
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (!(wsum > 0.0)) throw ConfigError("condition weights sum to zero");

  double acc = 0.0;
  for (std::size_t i = 0; i < ref_rows.rows.size(); ++i) {
    Distribution dp{ref_rows.outcome_labels, ref_rows.rows[i].second};
    Distribution dq{sim_rows.outcome_labels, sim_rows.rows[i].second};
    acc += weights[i] * jsd(dp, dq);
  }
  return acc / wsum;
}

std::size_t lcs_length(std::span<const ActionLabel> a, std::span<const ActionLabel> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(const Dialogue& reference, const Dialogue& candidate) {
  std::vector<ActionLabel> ref = reference.action_sequence();
  std::vector<ActionLabel> cand = candidate.action_sequence();
  if (ref.empty()) throw ValidationError("empty action sequence in dialogue '" + reference.id + "'");
  if (cand.empty()) throw ValidationError("empty action sequence in dialogue '" + candidate.id + "'");
  std::size_t lcs = lcs_length(ref, cand);
  if (lcs == 0) return {0.0, 0.0, 0.0};
  RougeScore s;
  s.recall = static_cast<double>(lcs) / static_cast<double>(ref.size());
  s.precision = static_cast<double>(lcs) / static_cast<double>(cand.size());
  // Balanced F; 2PR/(P+R) reduces to this exact form.
  s.f = 2.0 * static_cast<double>(lcs) / static_cast<double>(ref.size() + cand.size());
  return s;
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "mean") return Aggregation::Mean;
  if (s == "median") return Aggregation::Median;
  if (s == "max") return Aggregation::Max;
  throw ConfigError("unknown aggregation '" + s + "'");
}

const char* to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Mean: return "mean";
    case Aggregation::Median: return "median";
    case Aggregation::Max: return "max";
  }
  return "?";
}

RougeOrientation parse_orientation(const std::string& s) {
  if (s == "f") return RougeOrientation::F;
  if (s == "precision") return RougeOrientation::Precision;
  if (s == "recall") return RougeOrientation::Recall;
  throw ConfigError("unknown rouge orientation '" + s + "'");
}

const char* to_string(RougeOrientation o) {
  switch (o) {
    case RougeOrientation::F: return "f";
    case RougeOrientation::Precision: return "precision";
    case RougeOrientation::Recall: return "recall";
  }
  return "?";
}

double aggregate_pairwise(const Corpus& ref, const Corpus& syn, Aggregation aggr,
                          RougeOrientation orientation) {
  if (ref.empty() || syn.empty()) throw ValidationError("empty corpus");

  std::vector<std::vector<ActionLabel>> ref_seqs, syn_seqs;
  ref_seqs.reserve(ref.size());
  syn_seqs.reserve(syn.size());
  for (const Dialogue& d : ref.dialogues) {
    ref_seqs.push_back(d.action_sequence());
    if (ref_seqs.back().empty())
      throw ValidationError("empty action sequence in dialogue '" + d.id + "'");
  }
  for (const Dialogue& d : syn.dialogues) {
    syn_seqs.push_back(d.action_sequence());
    if (syn_seqs.back().empty())
      throw ValidationError("empty action sequence in dialogue '" + d.id + "'");
  }

  std::vector<double> scores;
  scores.reserve(ref_seqs.size() * syn_seqs.size());
  for (const auto& r : ref_seqs) {
    for (const auto& s : syn_seqs) {
      double lcs = static_cast<double>(lcs_length(r, s));
      switch (orientation) {
        case RougeOrientation::F:
          scores.push_back(2.0 * lcs / static_cast<double>(r.size() + s.size()));
          break;
        case RougeOrientation::Precision:
          scores.push_back(lcs / static_cast<double>(s.size()));
          break;
        case RougeOrientation::Recall:
          scores.push_back(lcs / static_cast<double>(r.size()));
          break;
      }
    }
  }
  // Reduce over the sorted multiset: the result depends only on the set of
  // pairs, not on dialogue order in either corpus.
  std::sort(scores.begin(), scores.end());
  switch (aggr) {
    case Aggregation::Max:
      return scores.back();
    case Aggregation::Median: {
      std::size_t n = scores.size();
      return n % 2 == 1 ? scores[n / 2] : 0.5 * (scores[n / 2 - 1] + scores[n / 2]);
    }
    case Aggregation::Mean: {
      double sum = 0.0;
      for (double v : scores) sum += v;
      return sum / static_cast<double>(scores.size());
    }
  }
  return 0.0;
}

double success_rate(const Corpus& c) {
  if (c.empty()) throw ValidationError("empty corpus");
  double sum = 0.0;
  for (const Dialogue& d : c.dialogues) {
    if (!d.success) throw ValidationError("dialogue '" + d.id + "' has no success label");
    sum += *d.success ? 1.0 : 0.0;
  }
  return sum / static_cast<double>(c.size());
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::Strict: return "strict";
    case Relation::Weak: return "weak";
    case Relation::Equal: return "equal";
    case Relation::None: return "none";
  }
  return "?";
}

std::vector<std::string> RankedList::ids_in_order() const {
  std::vector<std::string> ids;
  ids.reserve(entries.size());
  for (const auto& e : entries) ids.push_back(e.id);
  return ids;
}

RankedList rank_simulators(const std::map<std::string, ScoreStat>& scores,
                           Direction direction, double tie_tolerance) {
  if (scores.size() < 2) throw ValidationError("ranking needs at least two simulators");
  if (tie_tolerance < 0.0) throw ConfigError("negative tie tolerance");

  RankedList list;
  list.direction = direction;
  for (const auto& [id, st] : scores)
    list.entries.push_back(RankedEntry{id, st.mean, st.stddev, Relation::None});
  std::stable_sort(list.entries.begin(), list.entries.end(),
                   [&](const RankedEntry& a, const RankedEntry& b) {
                     if (a.mean != b.mean)
                       return direction == Direction::LowerBetter ? a.mean < b.mean
                                                                  : a.mean > b.mean;
                     return a.id < b.id;
                   });
  for (std::size_t i = 0; i + 1 < list.entries.size(); ++i) {
    double gap = std::abs(list.entries[i].mean - list.entries[i + 1].mean);
    if (list.entries[i].mean == list.entries[i + 1].mean)
      list.entries[i].to_next = Relation::Equal;
    else if (gap <= tie_tolerance)
      list.entries[i].to_next = Relation::Weak;
    else
      list.entries[i].to_next = Relation::Strict;
  }
  return list;
}

namespace detail {

std::map<std::string, double> tie_aware_ranks(const RankedList& r) {
  std::map<std::string, double> ranks;
  std::size_t i = 0;
  while (i < r.entries.size()) {
    std::size_t j = i;
    while (j + 1 < r.entries.size() && r.entries[j].to_next == Relation::Equal) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) ranks[r.entries[k].id] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

namespace {

void check_same_sets(const RankedList& r1, const RankedList& r2) {
  std::vector<std::string> a = r1.ids_in_order(), b = r2.ids_in_order();
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b) throw ValidationError("rankings cover different simulator sets");
}

}  // namespace

double kendall_tau(const RankedList& r1, const RankedList& r2) {
  check_same_sets(r1, r2);
  auto ranks1 = detail::tie_aware_ranks(r1);
  auto ranks2 = detail::tie_aware_ranks(r2);

  std::vector<std::string> ids = r1.ids_in_order();
  std::sort(ids.begin(), ids.end());
  const std::size_t n = ids.size();

  long long concordant = 0, discordant = 0, ties1 = 0, ties2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d1 = ranks1[ids[i]] - ranks1[ids[j]];
      double d2 = ranks2[ids[i]] - ranks2[ids[j]];
      if (d1 == 0.0 && d2 == 0.0) {
        ++ties1;
        ++ties2;
      } else if (d1 == 0.0) {
        ++ties1;
      } else if (d2 == 0.0) {
        ++ties2;
      } else if (d1 * d2 > 0.0) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  double denom = std::sqrt((n0 - static_cast<double>(ties1)) * (n0 - static_cast<double>(ties2)));
  if (denom == 0.0) return 0.0;  // every pair tied in one of the rankings
  return static_cast<double>(concordant - discordant) / denom;
}

SignificanceResult significance_test(std::span<const int> ref_labels,
                                     std::span<const int> sim_labels, double alpha,
                                     std::size_t n_resamples, std::uint64_t seed) {
  if (ref_labels.empty() || sim_labels.empty())
    throw ValidationError("significance test needs non-empty label sequences");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha outside (0, 1)");
  if (n_resamples < 1) throw ConfigError("n_resamples must be >= 1");

  const long long n1 = static_cast<long long>(ref_labels.size());
  const long long n2 = static_cast<long long>(sim_labels.size());
  long long k1 = 0, k2 = 0;
  for (int v : ref_labels) k1 += v ? 1 : 0;
  for (int v : sim_labels) k2 += v ? 1 : 0;
  const long long total = k1 + k2;
  const long long n = n1 + n2;

  if (total == 0 || total == n) return {1.0, false};  // no variation to test

  // Integer-scaled statistic |p1 - p2| * n1 * n2 keeps tie detection exact.
  const long long observed = std::llabs(k1 * n2 - k2 * n1);

  RandomStream rng(seed);
  std::size_t at_least = 0;
  for (std::size_t b = 0; b < n_resamples; ++b) {
    // Successes landing in the first group under a random relabeling.
    long long remaining = n, good = total, k = 0;
    for (long long j = 0; j < n1; ++j) {
      if (rng.next_unit() * static_cast<double>(remaining) < static_cast<double>(good)) {
        ++k;
        --good;
      }
      --remaining;
    }
    long long stat = std::llabs(k * n2 - (total - k) * n1);
    if (stat >= observed) ++at_least;
  }
  double p = static_cast<double>(1 + at_least) / static_cast<double>(1 + n_resamples);
  return {p, p < alpha};
}

}  // namespace simobj
