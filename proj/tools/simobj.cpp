// simobj: command-line workbench for scoring dialogue user simulators.
//
// Exit codes: 0 success, 2 validation error (bad input data),
// 3 configuration error (bad flags, config files, or usage), 4 runtime error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "simobj/behavior.hpp"
#include "simobj/corpus.hpp"
#include "simobj/error.hpp"
#include "simobj/experiment.hpp"
#include "simobj/fixtures.hpp"
#include "simobj/metrics.hpp"
#include "simobj/policy.hpp"
#include "simobj/simulate.hpp"
#include "simobj/util.hpp"

namespace {

using namespace simobj;

struct SeedChoice {
  std::uint64_t value = 42;
  std::string source = "default";
};

SeedChoice resolve_seed(const std::optional<std::uint64_t>& flag,
                        const std::optional<std::uint64_t>& config) {
  if (flag) return {*flag, "flag"};
  if (config) return {*config, "config"};
  if (const char* env = std::getenv("SIMOBJ_SEED")) {
    try {
      return {std::stoull(env), "env"};
    } catch (const std::exception&) {
      throw ConfigError(std::string("SIMOBJ_SEED is not an integer: '") + env + "'");
    }
  }
  return {};
}

UserModel resolve_user_model(const std::string& preset_name,
                             const std::optional<double>& patience,
                             const std::optional<double>& inclination) {
  if (!preset_name.empty()) {
    if (patience || inclination)
      throw ConfigError("--preset conflicts with --patience/--inclination");
    return preset(preset_name);
  }
  if (!patience || !inclination)
    throw ConfigError("either --preset or both --patience and --inclination are required");
  UserModel m{*patience, *inclination, ""};
  m.validate();
  return m;
}

OutcomeModel resolve_outcome(const std::string& mode, double tau) {
  OutcomeModel m;
  if (mode == "threshold")
    m.mode = LabelingMode::Threshold;
  else if (mode == "bernoulli")
    m.mode = LabelingMode::Bernoulli;
  else
    throw ConfigError("unknown labeling mode '" + mode + "'");
  m.tau = tau;
  m.validate();
  return m;
}

bool is_policy_file(const std::filesystem::path& p) { return p.extension() == ".json"; }

// --ref/--sim accept either a policy file (.json) or a corpus (.jsonl) from
// which a user policy is estimated on the fly.
ConditionalPolicy policy_from_arg(const std::filesystem::path& p, double smoothing) {
  if (is_policy_file(p)) return load_policy(p);
  return estimate_policy(load_corpus(p), Speaker::User, EstimateOptions{smoothing, false});
}

int cmd_validate(const std::string& path) {
  load_corpus(path);
  return 0;
}

int cmd_stats(const std::string& path) {
  Corpus c = load_corpus(path);
  std::cout << stats_csv_row(corpus_stats(c)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simobj: quantify how well a dialogue user simulator matches a reference "
               "user population (policy similarity) and predicts agent performance "
               "(success rate)"};
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
  app.require_subcommand(1);
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "verbose diagnostics on stderr");

  // validate
  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "Check a corpus file, exit 2 on the first error");
  validate->add_option("path", validate_path, "corpus file")->required();

  // stats
  std::string stats_path;
  CLI::App* stats = app.add_subcommand("stats", "Print count, mean/std length, label coverage as CSV");
  stats->add_option("path", stats_path, "corpus file")->required();

  // fit-policy
  std::string fit_corpus, fit_side = "user", fit_out;
  double fit_smoothing = 0.0;
  bool fit_responder_stop = false;
  CLI::App* fit = app.add_subcommand("fit-policy", "Estimate a conditional action policy from a corpus");
  fit->add_option("corpus", fit_corpus)->required();
  fit->add_option("--side", fit_side, "user|agent")->required();
  fit->add_option("--smoothing", fit_smoothing, "additive pseudo-count (default 0)");
  fit->add_flag("--stop-credit-responder", fit_responder_stop,
                "also credit the final responder with a Stop transition");
  fit->add_option("-o,--output", fit_out, "policy file to write")->required();

  // label
  std::string label_corpus_path, label_preset, label_mode = "threshold", label_out;
  std::optional<double> label_patience, label_inclination;
  double label_tau = 0.5;
  std::optional<std::uint64_t> label_seed;
  bool label_overwrite = false, label_skip = false;
  CLI::App* label = app.add_subcommand("label", "Assign success labels from the outcome model");
  label->add_option("corpus", label_corpus_path)->required();
  label->add_option("--patience", label_patience);
  label->add_option("--inclination", label_inclination);
  label->add_option("--preset", label_preset, "U1..U5");
  label->add_option("--mode", label_mode, "threshold|bernoulli");
  label->add_option("--tau", label_tau, "threshold (default 0.5)");
  label->add_option("--seed", label_seed, "bernoulli labeling seed");
  label->add_flag("--overwrite", label_overwrite, "replace existing labels");
  label->add_flag("--skip-invalid", label_skip, "skip dialogues lacking a side");
  label->add_option("-o,--output", label_out)->required();

  // simulate
  std::string sim_agent, sim_user, sim_preset, sim_mode = "threshold", sim_out;
  std::optional<double> sim_patience, sim_inclination;
  double sim_tau = 0.5;
  std::size_t sim_n = 500, sim_max_turns = 100;
  std::optional<std::uint64_t> sim_seed;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate labeled synthetic dialogues");
  simulate->add_option("--agent-policy", sim_agent)->required();
  simulate->add_option("--user-policy", sim_user)->required();
  simulate->add_option("--preset", sim_preset, "U1..U5");
  simulate->add_option("--patience", sim_patience);
  simulate->add_option("--inclination", sim_inclination);
  simulate->add_option("-n,--n-dialogues", sim_n, "batch size (default 500)");
  simulate->add_option("--seed", sim_seed);
  simulate->add_option("--max-turns", sim_max_turns, "length cap (default 100)");
  simulate->add_option("--mode", sim_mode, "threshold|bernoulli");
  simulate->add_option("--tau", sim_tau);
  simulate->add_option("-o,--output", sim_out)->required();

  // metrics
  CLI::App* metrics = app.add_subcommand("metrics", "Compute a single measure, print one CSV row");
  metrics->require_subcommand(1);
  std::string m_ref, m_sim, m_weighting = "reference", m_aggr = "mean";
  double m_smoothing = 0.0;
  CLI::App* m_jsd = metrics->add_subcommand("jsd", "policy divergence (corpus or policy inputs)");
  m_jsd->add_option("--ref", m_ref)->required();
  m_jsd->add_option("--sim", m_sim)->required();
  m_jsd->add_option("--weighting", m_weighting, "ref|reference|uniform");
  m_jsd->add_option("--smoothing", m_smoothing, "pseudo-count for corpus inputs");
  CLI::App* m_rouge = metrics->add_subcommand("rouge", "pairwise-aggregated ROUGE-L between corpora");
  std::string m_orient = "f";
  m_rouge->add_option("--ref", m_ref)->required();
  m_rouge->add_option("--sim", m_sim)->required();
  m_rouge->add_option("--aggr", m_aggr, "mean|median|max");
  m_rouge->add_option("--orientation", m_orient, "f|precision|recall");
  CLI::App* m_success = metrics->add_subcommand("success", "success rate and absolute difference");
  m_success->add_option("--ref", m_ref)->required();
  m_success->add_option("--sim", m_sim);

  // experiment
  CLI::App* experiment = app.add_subcommand("experiment", "Leave-one-out benchmark");
  experiment->require_subcommand(1);
  std::string exp_config, exp_outdir = "out";
  std::optional<std::uint64_t> exp_seed;
  std::size_t exp_workers = 1;
  std::string exp_format = "markdown";
  CLI::App* exp_run = experiment->add_subcommand("run", "Run the benchmark from a config file");
  exp_run->add_option("config", exp_config)->required();
  exp_run->add_option("-o,--outdir", exp_outdir)->required();
  exp_run->add_option("--seed", exp_seed, "override the config seed");
  exp_run->add_option("--workers", exp_workers, "worker threads (results are identical at any count)");
  exp_run->add_option("--format", exp_format, "markdown|csv (rankings.csv is always written)");
  std::string cmp_a, cmp_b, cmp_metric_a = "jsd", cmp_metric_b = "eval";
  CLI::App* exp_cmp = experiment->add_subcommand("compare", "Discordant-pair analysis between rankings");
  exp_cmp->add_option("rankings_a", cmp_a)->required();
  exp_cmp->add_option("rankings_b", cmp_b)->required();
  exp_cmp->add_option("--metric-a", cmp_metric_a, "jsd|rouge_l|eval (default jsd)");
  exp_cmp->add_option("--metric-b", cmp_metric_b, "jsd|rouge_l|eval (default eval)");

  // fixtures
  std::string fx_outdir;
  std::optional<std::uint64_t> fx_seed;
  CLI::App* fixtures = app.add_subcommand("fixtures", "Write the bundled synthetic fixture tree");
  fixtures->add_option("outdir", fx_outdir)->required();
  fixtures->add_option("--seed", fx_seed);

  // Let global flags like -v appear after the subcommand.
  for (CLI::App* sub : app.get_subcommands(nullptr)) {
    sub->fallthrough();
    for (CLI::App* nested : sub->get_subcommands(nullptr)) nested->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage hint
    return 3;
  }

  try {
    if (*validate) return cmd_validate(validate_path);
    if (*stats) return cmd_stats(stats_path);

    if (*fit) {
      auto side = parse_speaker(fit_side);
      if (!side) throw ConfigError("--side must be 'user' or 'agent'");
      Corpus c = load_corpus(fit_corpus);
      ConditionalPolicy p =
          estimate_policy(c, *side, EstimateOptions{fit_smoothing, fit_responder_stop});
      save_policy(p, fit_out);
      nlohmann::ordered_json prov;
      prov["tool"] = kToolName;
      prov["version"] = kToolVersion;
      prov["source_corpus"] = fit_corpus;
      prov["side"] = fit_side;
      prov["smoothing"] = fit_smoothing;
      prov["stop_credit_responder"] = fit_responder_stop;
      write_file(fit_out + ".provenance.json", prov.dump(2) + "\n");
      return 0;
    }

    if (*label) {
      UserModel um = resolve_user_model(label_preset, label_patience, label_inclination);
      OutcomeModel om = resolve_outcome(label_mode, label_tau);
      SeedChoice seed = resolve_seed(label_seed, std::nullopt);
      if (om.mode == LabelingMode::Bernoulli && verbosity > 0)
        std::cerr << "labeling seed " << seed.value << " (" << seed.source << ")\n";
      Corpus c = load_corpus(label_corpus_path);
      Corpus out = label_corpus(c, um, om, LabelOptions{label_overwrite, label_skip, seed.value});
      save_corpus(out, label_out);
      nlohmann::ordered_json prov;
      prov["tool"] = kToolName;
      prov["version"] = kToolVersion;
      prov["source_corpus"] = label_corpus_path;
      prov["patience"] = um.patience;
      prov["inclination"] = um.inclination;
      prov["mode"] = om.mode == LabelingMode::Threshold ? "threshold" : "bernoulli";
      prov["tau"] = om.tau;
      if (om.mode == LabelingMode::Bernoulli) {
        prov["seed"] = seed.value;
        prov["seed_source"] = seed.source;
      }
      prov["overwrite"] = label_overwrite;
      write_file(label_out + ".provenance.json", prov.dump(2) + "\n");
      return 0;
    }

    if (*simulate) {
      PolicyPair pair;
      pair.agent = load_policy(sim_agent);
      pair.user = load_policy(sim_user);
      pair.opener = pair.user.opener.value_or(Speaker::User);

      SimulationConfig cfg;
      cfg.n_dialogues = sim_n;
      cfg.max_turns = sim_max_turns;
      SeedChoice seed = resolve_seed(sim_seed, std::nullopt);
      cfg.master_seed = seed.value;
      cfg.outcome = resolve_outcome(sim_mode, sim_tau);
      cfg.user_model = resolve_user_model(sim_preset, sim_patience, sim_inclination);
      cfg.id_prefix = std::filesystem::path(sim_out).stem().string();

      SimulationBatch batch = generate_batch(pair, cfg);
      save_corpus(batch.dialogues, sim_out);
      batch.provenance.agent_policy_id = sim_agent;
      batch.provenance.user_policy_id = sim_user;
      save_provenance(batch.provenance, sim_out + ".provenance.json");
      if (verbosity > 0)
        std::cerr << "seed " << seed.value << " (" << seed.source << "), truncation rate "
                  << fmt_display(batch.provenance.truncation_rate()) << "\n";
      return 0;
    }

    if (*m_jsd) {
      ConditionalPolicy ref = policy_from_arg(m_ref, m_smoothing);
      ConditionalPolicy sim = policy_from_arg(m_sim, m_smoothing);
      JsdWeighting w;
      if (m_weighting == "ref" || m_weighting == "reference")
        w = JsdWeighting::ReferenceFrequency;
      else if (m_weighting == "uniform")
        w = JsdWeighting::Uniform;
      else
        throw ConfigError("unknown weighting '" + m_weighting + "'");
      std::cout << "jsd," << (w == JsdWeighting::Uniform ? "uniform" : "reference") << ","
                << fmt_full(policy_jsd(ref, sim, w)) << "\n";
      return 0;
    }
    if (*m_rouge) {
      Aggregation aggr = parse_aggregation(m_aggr);
      RougeOrientation orient = parse_orientation(m_orient);
      double v = aggregate_pairwise(load_corpus(m_ref), load_corpus(m_sim), aggr, orient);
      std::cout << "rouge_l," << to_string(aggr) << "," << fmt_full(v) << "\n";
      return 0;
    }
    if (*m_success) {
      double ref_rate = success_rate(load_corpus(m_ref));
      if (m_sim.empty()) {
        std::cout << "success_rate," << fmt_full(ref_rate) << "\n";
      } else {
        double sim_rate = success_rate(load_corpus(m_sim));
        std::cout << "success_rate," << fmt_full(ref_rate) << "," << fmt_full(sim_rate) << ","
                  << fmt_full(abs_perf_diff(ref_rate, sim_rate)) << "\n";
      }
      return 0;
    }

    if (*exp_run) {
      ExperimentConfig cfg = load_experiment_config(exp_config);
      SeedChoice seed = resolve_seed(
          exp_seed, cfg.seed_source == "config" ? std::optional<std::uint64_t>(cfg.master_seed)
                                                : std::nullopt);
      cfg.master_seed = seed.value;
      cfg.seed_source = seed.source;
      cfg.workers = exp_workers;

      ExperimentResult result = run_leave_one_out(cfg);

      std::filesystem::path outdir = exp_outdir;
      std::filesystem::create_directories(outdir);
      write_runs_csv(result.runs, result.report.provenance, outdir / "runs.csv");
      ReportFormat fmt;
      if (exp_format == "markdown")
        fmt = ReportFormat::Markdown;
      else if (exp_format == "csv")
        fmt = ReportFormat::Csv;
      else
        throw ConfigError("unknown format '" + exp_format + "'");
      emit_report(result.report, fmt, outdir);

      nlohmann::ordered_json prov;
      prov["tool"] = kToolName;
      prov["version"] = kToolVersion;
      prov["seed"] = cfg.master_seed;
      prov["seed_source"] = cfg.seed_source;
      prov["config_digest"] = cfg.config_digest;
      prov["config_path"] = exp_config;
      prov["n_dialogues"] = cfg.n_dialogues;
      prov["n_repetitions"] = cfg.n_repetitions;
      prov["max_turns"] = cfg.max_turns;
      prov["epsilon"] = cfg.epsilon;
      prov["tie_tolerance"] = cfg.tie_tolerance;
      prov["jsd_weighting"] =
          cfg.jsd_weighting == JsdWeighting::Uniform ? "uniform" : "reference";
      prov["rouge_aggregation"] = to_string(cfg.rouge_aggregation);
      prov["rouge_orientation"] = to_string(cfg.rouge_orientation);
      prov["labeling_mode"] =
          cfg.outcome.mode == LabelingMode::Threshold ? "threshold" : "bernoulli";
      prov["labeling_tau"] = cfg.outcome.tau;
      prov["enrich_reference_labels"] = cfg.enrich_reference_labels;
      write_file(outdir / "provenance.json", prov.dump(2) + "\n");
      if (verbosity > 0) std::cerr << "wrote " << (outdir / "runs.csv").string() << "\n";
      return 0;
    }

    if (*exp_cmp) {
      StoredRankings a = load_rankings_csv(cmp_a);
      StoredRankings b = load_rankings_csv(cmp_b);
      std::cout << "reference,metric_a,metric_b,tau,discordant_pairs\n";
      for (const auto& [ref, metric, list] : a.lists) {
        if (metric != cmp_metric_a) continue;
        const RankedList* other = b.find(ref, cmp_metric_b);
        if (!other) continue;
        RankingComparison cmp = compare_rankings(list, *other);
        std::string pairs;
        for (std::size_t i = 0; i < cmp.discordant.size(); ++i) {
          if (i > 0) pairs += ";";
          pairs += cmp.discordant[i].first + "|" + cmp.discordant[i].second;
        }
        std::cout << ref << "," << cmp_metric_a << "," << cmp_metric_b << ","
                  << fmt_full(cmp.tau) << "," << pairs << "\n";
      }
      return 0;
    }

    if (*fixtures) {
      SeedChoice seed = resolve_seed(fx_seed, std::nullopt);
      FixtureSummary summary = bootstrap_fixtures(fx_outdir, seed.value);
      if (verbosity > 0)
        std::cerr << summary.populations.size() << " populations, configs at "
                  << summary.minibench_config.string() << " and "
                  << summary.divergence_config.string() << "\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
