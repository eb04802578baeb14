#include "simobj/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "simobj/simulate.hpp"
#include "simobj/util.hpp"

namespace simobj {

using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kEnrichTag = 0xE11ABE1ULL;

void check_csv_safe(const std::string& name) {
  if (name.empty()) throw ConfigError("population name is empty");
  if (name.find_first_of(",\"\n\r") != std::string::npos)
    throw ConfigError("population name '" + name + "' holds CSV delimiter characters");
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); }))
    return 0.0;  // keep zero-variance columns exactly zero
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (populations.size() < 2) throw ConfigError("experiment needs at least two populations");
  if (n_repetitions < 1) throw ConfigError("n_repetitions must be >= 1");
  if (n_dialogues < 1) throw ConfigError("n_dialogues must be >= 1");
  if (max_turns < 2) throw ConfigError("max_turns must be >= 2");
  if (tie_tolerance < 0.0) throw ConfigError("negative tie tolerance");
  if (epsilon < 0.0) throw ConfigError("negative epsilon");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  outcome.validate();
  std::vector<std::string> names;
  for (const Population& p : populations) {
    check_csv_safe(p.name);
    names.push_back(p.name);
    p.user_model.validate();
    if (p.agent_policy.side != Speaker::Agent)
      throw ConfigError("population '" + p.name + "': agent policy has side 'user'");
    if (p.user_policy.side != Speaker::User)
      throw ConfigError("population '" + p.name + "': user policy has side 'agent'");
    p.agent_policy.validate();
    p.user_policy.validate();
    if (p.reference.empty())
      throw ConfigError("population '" + p.name + "' has an empty reference corpus");
  }
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end())
    throw ConfigError("duplicate population names");
}

namespace {

struct RefPrep {
  Corpus corpus;  // enriched when labels were absent
  double success = 0.0;
  std::map<Condition, double> jsd_weights;
};

RefPrep prepare_reference(const ExperimentConfig& cfg, std::size_t ri) {
  const Population& pop = cfg.populations[ri];
  RefPrep prep;
  prep.corpus = pop.reference;

  bool any_unlabeled = false;
  for (const Dialogue& d : prep.corpus.dialogues)
    if (!d.success) any_unlabeled = true;
  if (any_unlabeled && cfg.enrich_reference_labels) {
    LabelOptions opt;
    opt.overwrite = false;
    opt.seed = RandomStream::derive(cfg.master_seed, {kEnrichTag, ri}).next_u64();
    prep.corpus = label_corpus(prep.corpus, pop.user_model, cfg.outcome, opt);
  }
  prep.success = success_rate(prep.corpus);

  if (cfg.jsd_weighting == JsdWeighting::ReferenceFrequency) {
    if (!pop.user_policy.condition_weights.empty())
      prep.jsd_weights = pop.user_policy.condition_weights;
    else
      prep.jsd_weights = estimate_policy(prep.corpus, Speaker::User).condition_weights;
  }
  return prep;
}

}  // namespace

ExperimentResult run_leave_one_out(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n_pop = cfg.populations.size();

  std::vector<RefPrep> refs;
  refs.reserve(n_pop);
  for (std::size_t ri = 0; ri < n_pop; ++ri) refs.push_back(prepare_reference(cfg, ri));

  // Policies are fixed, so the divergence is constant across repetitions.
  std::vector<std::vector<double>> jsd_of(n_pop, std::vector<double>(n_pop, 0.0));
  for (std::size_t ri = 0; ri < n_pop; ++ri)
    for (std::size_t si = 0; si < n_pop; ++si)
      if (si != ri)
        jsd_of[ri][si] = policy_jsd(cfg.populations[ri].user_policy,
                                    cfg.populations[si].user_policy, cfg.jsd_weighting,
                                    refs[ri].jsd_weights);

  struct Cell {
    std::size_t ri, si, rep;
  };
  std::vector<Cell> cells;
  for (std::size_t ri = 0; ri < n_pop; ++ri)
    for (std::size_t si = 0; si < n_pop; ++si) {
      if (si == ri) continue;
      for (std::size_t rep = 0; rep < cfg.n_repetitions; ++rep) cells.push_back({ri, si, rep});
    }

  std::vector<RunResult> results(cells.size());
  std::atomic<std::size_t> cursor{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto run_cell = [&](std::size_t idx) {
    const Cell& cell = cells[idx];
    const Population& ref_pop = cfg.populations[cell.ri];
    const Population& sim_pop = cfg.populations[cell.si];

    PolicyPair pair;
    pair.agent = ref_pop.agent_policy;
    pair.user = sim_pop.user_policy;
    pair.opener = sim_pop.user_policy.opener.value_or(Speaker::User);

    SimulationConfig sim_cfg;
    sim_cfg.n_dialogues = cfg.n_dialogues;
    sim_cfg.max_turns = cfg.max_turns;
    sim_cfg.master_seed = cfg.master_seed;
    sim_cfg.outcome = cfg.outcome;
    sim_cfg.user_model = sim_pop.user_model;

    SimulationBatch batch = generate_batch(pair, sim_cfg, {cell.ri, cell.si, cell.rep});

    RunResult r;
    r.reference = ref_pop.name;
    r.simulator = sim_pop.name;
    r.repetition = cell.rep;
    r.jsd_value = jsd_of[cell.ri][cell.si];
    r.rouge_value = aggregate_pairwise(refs[cell.ri].corpus, batch.dialogues,
                                       cfg.rouge_aggregation, cfg.rouge_orientation);
    r.ref_success = refs[cell.ri].success;
    r.sim_success = success_rate(batch.dialogues);
    r.abs_diff = abs_perf_diff(r.ref_success, r.sim_success);
    r.within_epsilon = EpsilonThreshold{cfg.epsilon}.accepts(r.abs_diff);
    r.truncation_rate = batch.provenance.truncation_rate();
    results[idx] = std::move(r);
  };

  auto worker = [&] {
    while (true) {
      std::size_t idx = cursor.fetch_add(1);
      if (idx >= cells.size()) break;
      try {
        run_cell(idx);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  std::size_t n_workers = std::min(cfg.workers, cells.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ExperimentResult out;
  out.runs = std::move(results);

  out.report.provenance =
      std::string("# ") + kToolName + " " + kToolVersion +
      " seed=" + std::to_string(cfg.master_seed) + " seed_source=" + cfg.seed_source +
      " config=" + cfg.config_digest + " n=" + std::to_string(cfg.n_dialogues) +
      " reps=" + std::to_string(cfg.n_repetitions) + " jsd_weighting=" +
      (cfg.jsd_weighting == JsdWeighting::Uniform ? "uniform" : "reference") +
      " rouge_aggr=" + to_string(cfg.rouge_aggregation) + " rouge_orient=" +
      to_string(cfg.rouge_orientation) + " labeling=" +
      (cfg.outcome.mode == LabelingMode::Threshold
           ? "threshold(" + fmt_full(cfg.outcome.tau) + ")"
           : "bernoulli") +
      " epsilon=" + fmt_full(cfg.epsilon) + " tie_tol=" + fmt_full(cfg.tie_tolerance);

  for (std::size_t ri = 0; ri < n_pop; ++ri) {
    ReferenceRanking rank;
    rank.reference = cfg.populations[ri].name;
    rank.ref_success = refs[ri].success;

    std::map<std::string, ScoreStat> jsd_scores, rouge_scores, eval_scores;
    for (std::size_t si = 0; si < n_pop; ++si) {
      if (si == ri) continue;
      const std::string& sim_name = cfg.populations[si].name;
      std::vector<double> rouges, diffs;
      for (const RunResult& r : out.runs)
        if (r.reference == rank.reference && r.simulator == sim_name) {
          rouges.push_back(r.rouge_value);
          diffs.push_back(r.abs_diff);
        }
      double rouge_mean = 0.0, diff_mean = 0.0;
      for (double v : rouges) rouge_mean += v;
      for (double v : diffs) diff_mean += v;
      rouge_mean /= static_cast<double>(rouges.size());
      diff_mean /= static_cast<double>(diffs.size());
      jsd_scores[sim_name] = {jsd_of[ri][si], 0.0};
      rouge_scores[sim_name] = {rouge_mean, sample_std(rouges, rouge_mean)};
      eval_scores[sim_name] = {diff_mean, sample_std(diffs, diff_mean)};
    }

    auto build = [&](const std::map<std::string, ScoreStat>& scores, Direction dir) {
      if (scores.size() >= 2) return rank_simulators(scores, dir, cfg.tie_tolerance);
      RankedList single;
      single.direction = dir;
      for (const auto& [id, st] : scores)
        single.entries.push_back(RankedEntry{id, st.mean, st.stddev, Relation::None});
      return single;
    };
    rank.jsd = build(jsd_scores, Direction::LowerBetter);
    rank.rouge = build(rouge_scores, Direction::HigherBetter);
    rank.eval = build(eval_scores, Direction::LowerBetter);
    rank.tau_jsd_rouge = kendall_tau(rank.jsd, rank.rouge);
    rank.tau_jsd_eval = kendall_tau(rank.jsd, rank.eval);
    rank.tau_rouge_eval = kendall_tau(rank.rouge, rank.eval);
    out.report.per_reference.push_back(std::move(rank));
  }
  return out;
}

RankingComparison compare_rankings(const RankedList& r1, const RankedList& r2) {
  RankingComparison cmp;
  cmp.tau = kendall_tau(r1, r2);
  auto ranks1 = detail::tie_aware_ranks(r1);
  auto ranks2 = detail::tie_aware_ranks(r2);
  for (std::size_t i = 0; i < r1.entries.size(); ++i) {
    for (std::size_t j = i + 1; j < r1.entries.size(); ++j) {
      const std::string& a = r1.entries[i].id;
      const std::string& b = r1.entries[j].id;
      double d1 = ranks1[a] - ranks1[b];
      double d2 = ranks2[a] - ranks2[b];
      if (d1 != 0.0 && d2 != 0.0 && d1 * d2 < 0.0) cmp.discordant.emplace_back(a, b);
    }
  }
  return cmp;
}

namespace {

const char* relation_mark(Relation r) {
  switch (r) {
    case Relation::Strict: return "≻";  // succeeds
    case Relation::Weak: return "⪰";    // succeeds or equals
    case Relation::Equal: return "=";
    case Relation::None: return "";
  }
  return "";
}

std::string ranking_line(const RankedList& list) {
  std::ostringstream os;
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    const RankedEntry& e = list.entries[i];
    os << e.id << " (" << fmt_display(e.mean) << " ± " << fmt_display(e.stddev) << ")";
    if (i + 1 < list.entries.size()) os << " " << relation_mark(e.to_next) << " ";
  }
  return os.str();
}

void append_rankings_csv(std::ostringstream& os, const std::string& reference,
                         const std::string& metric, const RankedList& list) {
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    const RankedEntry& e = list.entries[i];
    os << reference << "," << metric << "," << (i + 1) << "," << e.id << ","
       << fmt_full(e.mean) << "," << fmt_full(e.stddev) << "," << to_string(e.to_next)
       << "\n";
  }
}

}  // namespace

void write_runs_csv(const std::vector<RunResult>& runs, const std::string& provenance,
                    const std::filesystem::path& path) {
  std::ostringstream os;
  os << provenance << "\n";
  os << "reference,simulator,repetition,jsd,rouge_l,ref_success_rate,sim_success_rate,"
        "abs_diff,within_epsilon,truncation_rate\n";
  for (const RunResult& r : runs) {
    os << r.reference << "," << r.simulator << "," << r.repetition << ","
       << fmt_full(r.jsd_value) << "," << fmt_full(r.rouge_value) << ","
       << fmt_full(r.ref_success) << "," << fmt_full(r.sim_success) << ","
       << fmt_full(r.abs_diff) << "," << (r.within_epsilon ? "true" : "false") << ","
       << fmt_full(r.truncation_rate) << "\n";
  }
  write_file(path, os.str());
}

void emit_report(const RankingReport& report, ReportFormat format,
                 const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);

  std::ostringstream csv;
  csv << report.provenance << "\n";
  csv << "reference,metric,rank,simulator,mean,stddev,relation_to_next\n";
  for (const ReferenceRanking& r : report.per_reference) {
    append_rankings_csv(csv, r.reference, "jsd", r.jsd);
    append_rankings_csv(csv, r.reference, "rouge_l", r.rouge);
    append_rankings_csv(csv, r.reference, "eval", r.eval);
  }
  write_file(outdir / "rankings.csv", csv.str());

  std::ostringstream tau;
  tau << report.provenance << "\n";
  tau << "reference,jsd_rouge,jsd_eval,rouge_eval\n";
  for (const ReferenceRanking& r : report.per_reference)
    tau << r.reference << "," << fmt_full(r.tau_jsd_rouge) << "," << fmt_full(r.tau_jsd_eval)
        << "," << fmt_full(r.tau_rouge_eval) << "\n";
  write_file(outdir / "tau.csv", tau.str());

  if (format == ReportFormat::Markdown) {
    std::ostringstream md;
    md << "# Simulator rankings\n\n" << report.provenance << "\n";
    for (const ReferenceRanking& r : report.per_reference) {
      md << "\n## Reference: " << r.reference << " (success rate "
         << fmt_display(r.ref_success) << ")\n\n";
      md << "| Objective | Metric | Ranking (best to worst) |\n";
      md << "|---|---|---|\n";
      md << "| Training | JSD | " << ranking_line(r.jsd) << " |\n";
      md << "| Training | ROUGE-L | " << ranking_line(r.rouge) << " |\n";
      md << "| Evaluation | Abs. diff. success rate | " << ranking_line(r.eval) << " |\n";
      md << "\nKendall's τ: (JSD, ROUGE-L) = " << fmt_display(r.tau_jsd_rouge)
         << ", (JSD, evaluation) = " << fmt_display(r.tau_jsd_eval)
         << ", (ROUGE-L, evaluation) = " << fmt_display(r.tau_rouge_eval) << "\n";
    }
    write_file(outdir / "rankings.md", md.str());
  }
}

namespace {

UserModel user_model_from_json(const json& j, const std::filesystem::path& base) {
  if (j.is_string()) {
    std::filesystem::path p = j.get<std::string>();
    if (p.is_relative()) p = base / p;
    json inner = json::parse(read_file(p), nullptr, false);
    if (inner.is_discarded()) throw ConfigError(p.string() + ": malformed user model file");
    return user_model_from_json(inner, base);
  }
  if (!j.is_object()) throw ConfigError("user model must be a path or an object");
  if (j.contains("preset")) return preset(j["preset"].get<std::string>());
  UserModel m;
  if (!j.contains("patience") || !j.contains("inclination"))
    throw ConfigError("user model needs 'patience' and 'inclination'");
  m.patience = j["patience"].get<double>();
  m.inclination = j["inclination"].get<double>();
  if (j.contains("name")) m.name = j["name"].get<std::string>();
  m.validate();
  return m;
}

std::filesystem::path resolve(const json& j, const char* field,
                              const std::filesystem::path& base) {
  if (!j.contains(field) || !j[field].is_string())
    throw ConfigError(std::string("population needs field '") + field + "'");
  std::filesystem::path p = j[field].get<std::string>();
  return p.is_relative() ? base / p : p;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": malformed configuration");

  ExperimentConfig cfg;
  cfg.config_digest = fnv1a64_hex(bytes);
  std::filesystem::path base = path.parent_path();

  if (!j.contains("populations") || !j["populations"].is_array())
    throw ConfigError(path.string() + ": missing 'populations' array");
  for (const json& pj : j["populations"]) {
    Population pop;
    if (!pj.contains("name") || !pj["name"].is_string())
      throw ConfigError(path.string() + ": population without a name");
    pop.name = pj["name"].get<std::string>();
    try {
      pop.agent_policy = load_policy(resolve(pj, "agent_policy", base));
      pop.user_policy = load_policy(resolve(pj, "user_policy", base));
      pop.reference = load_corpus(resolve(pj, "corpus", base));
    } catch (const ValidationError& e) {
      throw ConfigError("population '" + pop.name + "': " + e.what());
    }
    if (pj.contains("user_model"))
      pop.user_model = user_model_from_json(pj["user_model"], base);
    else if (pj.contains("preset"))
      pop.user_model = preset(pj["preset"].get<std::string>());
    else
      throw ConfigError("population '" + pop.name + "' needs 'user_model' or 'preset'");
    cfg.populations.push_back(std::move(pop));
  }

  if (j.contains("n_dialogues")) cfg.n_dialogues = j["n_dialogues"].get<std::size_t>();
  if (j.contains("n_repetitions")) cfg.n_repetitions = j["n_repetitions"].get<std::size_t>();
  if (j.contains("max_turns")) cfg.max_turns = j["max_turns"].get<std::size_t>();
  if (j.contains("seed")) {
    cfg.master_seed = j["seed"].get<std::uint64_t>();
    cfg.seed_source = "config";
  }
  if (j.contains("tie_tolerance")) cfg.tie_tolerance = j["tie_tolerance"].get<double>();
  if (j.contains("epsilon")) cfg.epsilon = j["epsilon"].get<double>();
  if (j.contains("enrich_reference_labels"))
    cfg.enrich_reference_labels = j["enrich_reference_labels"].get<bool>();
  if (j.contains("jsd_weighting")) {
    std::string w = j["jsd_weighting"].get<std::string>();
    if (w == "reference")
      cfg.jsd_weighting = JsdWeighting::ReferenceFrequency;
    else if (w == "uniform")
      cfg.jsd_weighting = JsdWeighting::Uniform;
    else
      throw ConfigError("unknown jsd_weighting '" + w + "'");
  }
  if (j.contains("rouge_aggregation"))
    cfg.rouge_aggregation = parse_aggregation(j["rouge_aggregation"].get<std::string>());
  if (j.contains("rouge_orientation"))
    cfg.rouge_orientation = parse_orientation(j["rouge_orientation"].get<std::string>());
  if (j.contains("labeling")) {
    const json& lj = j["labeling"];
    if (lj.contains("mode")) {
      std::string mode = lj["mode"].get<std::string>();
      if (mode == "threshold")
        cfg.outcome.mode = LabelingMode::Threshold;
      else if (mode == "bernoulli")
        cfg.outcome.mode = LabelingMode::Bernoulli;
      else
        throw ConfigError("unknown labeling mode '" + mode + "'");
    }
    if (lj.contains("tau")) cfg.outcome.tau = lj["tau"].get<double>();
    if (lj.contains("w1")) cfg.outcome.w1 = lj["w1"].get<double>();
    if (lj.contains("w2")) cfg.outcome.w2 = lj["w2"].get<double>();
    if (lj.contains("w3")) cfg.outcome.w3 = lj["w3"].get<double>();
  }

  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

const RankedList* StoredRankings::find(const std::string& reference,
                                       const std::string& metric) const {
  for (const auto& [ref, met, list] : lists)
    if (ref == reference && met == metric) return &list;
  return nullptr;
}

StoredRankings load_rankings_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  StoredRankings out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("reference,", 0) == 0) continue;  // header
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 7)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 7 CSV fields");
    const std::string& ref = fields[0];
    const std::string& metric = fields[1];
    RankedList* list = nullptr;
    for (auto& [r, m, l] : out.lists)
      if (r == ref && m == metric) list = &l;
    if (!list) {
      Direction dir = metric == "rouge_l" ? Direction::HigherBetter : Direction::LowerBetter;
      out.lists.emplace_back(ref, metric, RankedList{{}, dir});
      list = &std::get<2>(out.lists.back());
    }
    RankedEntry e;
    e.id = fields[3];
    e.mean = std::stod(fields[4]);
    e.stddev = std::stod(fields[5]);
    if (fields[6] == "strict")
      e.to_next = Relation::Strict;
    else if (fields[6] == "weak")
      e.to_next = Relation::Weak;
    else if (fields[6] == "equal")
      e.to_next = Relation::Equal;
    else
      e.to_next = Relation::None;
    list->entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace simobj
