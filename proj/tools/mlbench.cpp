#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mlbench/experiment.hpp"
#include "mlbench/validation.hpp"

using namespace mlbench;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string model;
  std::optional<int> trials;
  std::optional<int> workers;
  bool no_timing = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "INI experiment configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--model", f.model, "clustering, lowrank or binary")
      ->check(CLI::IsMember({"clustering", "lowrank", "binary"}));
  cmd->add_option("--trials", f.trials, "trials per (estimator, budget) cell")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-timing", f.no_timing, "write zero wall times for byte-stable output");
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) {
    c = load_experiment(f.config);
    if (!f.model.empty() && parse_model_kind(f.model) != kind(c.spec)) {
      throw std::invalid_argument("--model " + f.model + " contradicts the config file");
    }
  } else {
    c = default_experiment(f.model.empty() ? ModelKind::Clustering : parse_model_kind(f.model));
  }
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.trials) c.n_trials = *f.trials;
  if (f.workers) c.workers = *f.workers;
  if (f.no_timing) c.record_timing = false;
  validate(c);
  return c;
}

int cmd_simulate(const ExperimentConfig& c) {
  simulate_benchmark(c);
  std::cout << "wrote " << dataset_path(c.out_dir).string() << " and "
            << state_path(c.out_dir).string() << " (" << describe(c.spec) << ", seed " << c.seed
            << ")\n";
  return 0;
}

int cmd_ground_truth(ExperimentConfig c, std::optional<long> T, std::optional<int> chains) {
  if (T) c.ground_truth_T = *T;
  if (chains) c.ground_truth_chains = *chains;
  validate(c);
  const auto bench = load_benchmark(c);
  const auto gt = run_ground_truth(c, bench);
  write_ground_truth(ground_truth_path(c.out_dir), gt);
  std::printf("lower %.6f upper %.6f gap %.6f (T=%ld, %d chains)\n", gt.lower, gt.upper, gt.gap,
              gt.T, gt.chains);
  if (!gt.converged) {
    std::cout << "not converged, increase T\n";
    return 2;
  }
  std::printf("converged: ground truth %.6f\n", *gt.truth);
  return 0;
}

int cmd_sweep(ExperimentConfig c, const std::vector<std::string>& only) {
  if (!only.empty()) {
    std::vector<EstimatorPlan> kept;
    for (const auto& name : only) {
      const auto k = estimator_info(name).kind;
      bool found = false;
      for (const auto& e : c.estimators) {
        if (e.kind == k) {
          kept.push_back(e);
          found = true;
        }
      }
      if (!found) throw std::invalid_argument("estimator " + name + " is not in the config");
    }
    c.estimators = kept;
  }
  const auto bench = load_benchmark(c);
  if (!std::filesystem::exists(ground_truth_path(c.out_dir))) {
    std::cerr << "warning: no ground truth in " << c.out_dir.string()
              << "; run ground-truth before report\n";
  }
  const auto rows = run_sweep(c, bench, &std::cerr);
  write_results(results_path(c.out_dir), rows);
  int failed = 0;
  std::ofstream errors;
  for (const auto& r : rows) {
    if (r.combined || r.error.empty()) continue;
    if (!errors.is_open()) errors.open(c.out_dir / "errors.txt", std::ios::binary);
    errors << r.estimator << "," << r.budget_value << "," << r.trial << "," << r.seed << ","
           << r.error << "\n";
    ++failed;
  }
  std::cout << "wrote " << rows.size() << " rows to " << results_path(c.out_dir).string();
  if (failed) std::cout << " (" << failed << " failed trials, see errors.txt)";
  std::cout << "\n";
  return 0;
}

int cmd_report(const ExperimentConfig& c, std::optional<double> truth_flag) {
  const auto rows = read_results(results_path(c.out_dir));
  std::optional<double> truth = truth_flag;
  if (!truth && std::filesystem::exists(ground_truth_path(c.out_dir))) {
    const auto gt = read_ground_truth(ground_truth_path(c.out_dir));
    if (gt.converged) {
      truth = gt.truth;
    } else {
      std::cerr << "warning: ground truth not converged; RMSE columns omitted\n";
    }
  }
  if (!truth) std::cerr << "warning: missing ground truth; RMSE columns omitted\n";
  const auto report = build_report(rows, truth);
  write_report(c.out_dir, report);
  std::ifstream txt(c.out_dir / "summary.txt");
  std::cout << txt.rdbuf();
  return 0;
}

ModelSpec small_spec(ModelKind k, int N, int D, int K) {
  switch (k) {
    case ModelKind::Clustering: return validated(ClusteringSpec{N, D, K});
    case ModelKind::LowRank: return validated(LowRankSpec{N, D, K});
    case ModelKind::Binary: return validated(BinarySpec{N, D, K});
  }
  throw std::invalid_argument("unknown model");
}

int cmd_validate(const ExperimentConfig& c, const std::string& model, int triples,
                 int geweke_samples) {
  std::vector<ModelKind> kinds = {ModelKind::Clustering, ModelKind::LowRank, ModelKind::Binary};
  if (!model.empty()) kinds = {parse_model_kind(model)};
  std::filesystem::create_directories(c.out_dir);
  std::ofstream csv(c.out_dir / "validation.csv", std::ios::binary);
  csv << "model,suite,item,statistic,threshold,pass\n";
  bool all = true;
  for (auto k : kinds) {
    const std::string name = model_name(k);
    const ModelSpec spec = small_spec(k, 10, 3, 3);
    const RngStream rng(c.seed, static_cast<std::uint64_t>(k) + 10);

    const auto cons = conditional_consistency_suite(spec, triples, rng.substream(0));
    TransitionOptions mutant;
    mutant.mutant_noise_scale = 1.1;
    const auto cons_mut = conditional_consistency_suite(spec, triples, rng.substream(0), mutant);
    std::cout << "[" << name << "] conditional consistency (" << triples << " triples)\n";
    for (const auto& e : cons.entries) {
      std::printf("  %-48s worst %.3e  %s\n", e.name.c_str(), e.worst, e.pass ? "pass" : "FAIL");
      csv << name << ",consistency," << e.name << "," << format_double(e.worst) << ","
          << kConsistencyTolerance << "," << e.pass << "\n";
    }
    std::printf("  x1.1 noise mutant detected: %s\n", cons_mut.pass ? "no" : "yes");
    csv << name << ",consistency,mutant detected,," << kConsistencyTolerance << ","
        << !cons_mut.pass << "\n";

    GewekeConfig g;
    g.n_samples = geweke_samples;
    const auto gw = geweke_test(spec, g, rng.substream(1));
    std::cout << "[" << name << "] Geweke (" << g.n_samples << " chains of " << g.chain_length
              << ")\n";
    for (const auto& s : gw.statistics) {
      std::printf("  %-16s KS %.4f  p %.4g\n", s.name.c_str(), s.ks.statistic, s.ks.p_value);
      csv << name << ",geweke," << s.name << "," << format_double(s.ks.p_value) << ","
          << format_double(gw.alpha / static_cast<double>(gw.statistics.size())) << ","
          << (s.ks.p_value > gw.alpha / static_cast<double>(gw.statistics.size())) << "\n";
    }
    std::printf("  overall: %s\n", gw.pass ? "pass" : "FAIL");
    all = all && cons.pass && !cons_mut.pass && gw.pass;
  }
  std::cout << (all ? "validation passed\n" : "validation FAILED\n");
  return all ? 0 : 1;
}

int cmd_oracle(const ExperimentConfig& c) {
  const auto bench = load_benchmark(c);
  std::printf("%.10f\n", brute_force_log_ml(c.spec, bench.data));
  return 0;
}

int cmd_replay(const ExperimentConfig& c, const std::string& estimator, long budget,
               std::uint64_t seed) {
  const auto bench = load_benchmark(c);
  const auto e = run_estimator(estimator_info(estimator).kind, budget, c.spec, bench.data,
                               &bench.exact, RngStream(seed, kTrialStream));
  std::cout << format_double(e.value) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marginal likelihood estimator benchmark"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* sim = app.add_subcommand("simulate", "simulate a dataset and its exact posterior sample");
  auto* gt = app.add_subcommand("ground-truth", "bidirectional AIS sandwich of the log-ML");
  auto* sweep = app.add_subcommand("sweep", "run every estimator over its budget grid");
  auto* report = app.add_subcommand("report", "summary tables and plot data");
  auto* val = app.add_subcommand("validate", "conditional consistency and Geweke suites");
  auto* oracle = app.add_subcommand("oracle", "exact log-ML by enumeration or quadrature");
  auto* replay = app.add_subcommand("replay", "rerun a single trial from its seed");
  for (auto* cmd : {sim, gt, sweep, report, val, oracle, replay}) add_common(cmd, flags);

  std::optional<long> gt_T;
  std::optional<int> gt_chains;
  gt->add_option("--T", gt_T, "intermediate distributions")->check(CLI::Range(2L, 100000000L));
  gt->add_option("--chains", gt_chains, "chains per direction")->check(CLI::PositiveNumber);

  std::vector<std::string> only;
  sweep->add_option("--estimator", only, "restrict to these estimators")->delimiter(',');

  std::optional<double> truth;
  report->add_option("--truth", truth, "ground-truth log-ML overriding ground_truth.txt");

  int triples = 1000, geweke_samples = 1000;
  val->add_option("--triples", triples, "triples per conditional")->check(CLI::PositiveNumber);
  val->add_option("--geweke-samples", geweke_samples, "Geweke chains")->check(CLI::Range(2, 1000000));

  std::string replay_estimator;
  long replay_budget = 0;
  std::uint64_t replay_seed = 0;
  replay->add_option("--estimator", replay_estimator, "estimator name")->required();
  replay->add_option("--budget", replay_budget, "budget value")->required();
  replay->add_option("--trial-seed", replay_seed, "seed column of the row")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    const auto c = resolve(flags);
    if (*sim) return cmd_simulate(c);
    if (*gt) return cmd_ground_truth(c, gt_T, gt_chains);
    if (*sweep) return cmd_sweep(c, only);
    if (*report) return cmd_report(c, truth);
    if (*val) return cmd_validate(c, flags.model, triples, geweke_samples);
    if (*oracle) return cmd_oracle(c);
    if (*replay) return cmd_replay(c, replay_estimator, replay_budget, replay_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
