#pragma once

// Leave-one-out benchmark orchestration: each population serves once as the
// reference; every other population's user policy and user model form a
// candidate simulator that is scored against it over repeated synthetic
// batches. Results aggregate to mean +/- sample std, per-reference rankings
// on the three measures, and cross-metric Kendall's tau.
//
// (reference, simulator, repetition) cells are independent; the worker
// count changes wall-clock time only, never any emitted byte.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "simobj/behavior.hpp"
#include "simobj/corpus.hpp"
#include "simobj/metrics.hpp"
#include "simobj/policy.hpp"

namespace simobj {

struct Population {
  std::string name;
  ConditionalPolicy agent_policy;
  ConditionalPolicy user_policy;
  UserModel user_model;
  Corpus reference;  // labeled, or enrichable with the population's own model
};

struct ExperimentConfig {
  std::vector<Population> populations;
  std::size_t n_dialogues = 500;
  std::size_t n_repetitions = 10;
  std::size_t max_turns = 100;
  std::uint64_t master_seed = 42;
  double tie_tolerance = 0.005;
  double epsilon = 0.05;
  OutcomeModel outcome;
  JsdWeighting jsd_weighting = JsdWeighting::ReferenceFrequency;
  Aggregation rouge_aggregation = Aggregation::Mean;
  RougeOrientation rouge_orientation = RougeOrientation::F;
  // Synthesize labels with the reference's own user model when absent.
  bool enrich_reference_labels = true;
  std::size_t workers = 1;

  // Provenance stamped into every emitted file.
  std::string seed_source = "default";
  std::string config_digest = "none";

  void validate() const;  // ConfigError
};

struct RunResult {
  std::string reference;
  std::string simulator;
  std::size_t repetition = 0;
  double jsd_value = 0.0;   // constant across repetitions of a pair
  double rouge_value = 0.0;
  double ref_success = 0.0;
  double sim_success = 0.0;
  double abs_diff = 0.0;
  bool within_epsilon = false;
  double truncation_rate = 0.0;
};

struct ReferenceRanking {
  std::string reference;
  double ref_success = 0.0;
  RankedList jsd;    // lower better
  RankedList rouge;  // higher better
  RankedList eval;   // absolute success-rate difference, lower better
  double tau_jsd_rouge = 0.0;
  double tau_jsd_eval = 0.0;
  double tau_rouge_eval = 0.0;
};

struct RankingReport {
  std::vector<ReferenceRanking> per_reference;
  std::string provenance;  // single header line stamped into emitted files
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  RankingReport report;
};

ExperimentResult run_leave_one_out(const ExperimentConfig& cfg);

struct RankingComparison {
  double tau = 0.0;
  // Pairs ordered strictly oppositely by the two rankings, each pair in
  // first-ranking order, listed deterministically.
  std::vector<std::pair<std::string, std::string>> discordant;
};

RankingComparison compare_rankings(const RankedList& r1, const RankedList& r2);

enum class ReportFormat { Csv, Markdown };

// rankings.csv (always) plus rankings.md for the markdown format, and
// tau.csv. Byte-stable for a fixed report.
void emit_report(const RankingReport& report, ReportFormat format,
                 const std::filesystem::path& outdir);
void write_runs_csv(const std::vector<RunResult>& runs, const std::string& provenance,
                    const std::filesystem::path& path);

// Experiment configuration document (JSON): populations with paths to
// policy/corpus/user-model files (resolved relative to the config file),
// plus counts, seed, tolerances, and metric options. Throws ConfigError.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Rankings re-loaded from a rankings.csv for offline comparison.
struct StoredRankings {
  // (reference, metric) -> ranked list; metric in {"jsd", "rouge_l", "eval"}.
  std::vector<std::tuple<std::string, std::string, RankedList>> lists;

  const RankedList* find(const std::string& reference, const std::string& metric) const;
};

StoredRankings load_rankings_csv(const std::filesystem::path& path);

}  // namespace simobj
