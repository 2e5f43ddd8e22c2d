#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mlbench/catalogue.hpp"
#include "mlbench/io.hpp"

namespace mlbench {

// Stream ids under the master seed.
inline constexpr std::uint64_t kSimulateStream = 1;
inline constexpr std::uint64_t kGroundTruthStream = 2;
inline constexpr std::uint64_t kTrialStream = 3;

struct EstimatorPlan {
  EstimatorKind kind;
  std::vector<long> budgets;
};

struct ExperimentConfig {
  ModelSpec spec = ClusteringSpec{};
  std::uint64_t seed = 1;
  int n_trials = 25;
  std::vector<EstimatorPlan> estimators;
  long ground_truth_T = 30000;
  int ground_truth_chains = 25;
  std::filesystem::path out_dir = "out";
  int workers = 1;
  bool record_timing = true;
};

// Desk-scale defaults for the model: the benchmark sizes and a budget grid
// for every estimator.
ExperimentConfig default_experiment(ModelKind kind);

// INI file with sections [experiment], [model], [ground_truth], [estimators].
// Keys left out keep the defaults of the configured model.
ExperimentConfig load_experiment(const std::filesystem::path& path);
void validate(const ExperimentConfig& config);

// Seed of one sweep cell; replaying RngStream(seed, kTrialStream) reproduces
// the trial in isolation.
std::uint64_t trial_seed(std::uint64_t master, const std::string& estimator, long budget,
                         int trial);

// ----- files in the output directory

std::filesystem::path dataset_path(const std::filesystem::path& dir);
std::filesystem::path state_path(const std::filesystem::path& dir);
std::filesystem::path ground_truth_path(const std::filesystem::path& dir);
std::filesystem::path results_path(const std::filesystem::path& dir);

struct Benchmark {
  Dataset data;
  ExactSample exact;
};

// Simulates the dataset under the master seed and writes both files.
Benchmark simulate_benchmark(const ExperimentConfig& config);
Benchmark load_benchmark(const ExperimentConfig& config);

// ----- ground truth

inline constexpr double kGroundTruthGap = 1.0;

struct GroundTruth {
  double lower = 0.0;
  double upper = 0.0;
  double gap = 0.0;
  long T = 0;
  int chains = 0;
  bool converged = false;
  std::optional<double> truth;  // midpoint, present only when converged
};

GroundTruth ground_truth_from(const SandwichResult& sandwich, long T, int chains);
GroundTruth run_ground_truth(const ExperimentConfig& config, const Benchmark& bench);
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);
GroundTruth read_ground_truth(const std::filesystem::path& path);

// ----- sweep

struct ResultRow {
  std::string model;
  std::string estimator;
  std::string budget_name;
  long budget_value = 0;
  int trial = 0;  // -1 on combined rows
  std::uint64_t seed = 0;
  double log_ml = 0.0;
  std::string direction;
  double wall_seconds = 0.0;
  bool combined = false;
  std::string error;  // not serialized; the row carries log_ml = nan
};

inline constexpr const char* kResultHeader =
    "model,estimator,budget_name,budget_value,trial,seed,log_ml,direction,wall_seconds,combined";

// One trial of a cell, errors captured in the row.
ResultRow run_trial(const ExperimentConfig& config, const Benchmark& bench, EstimatorKind kind,
                    long budget, int trial);

// Combined row of a cell from its trial rows; failed trials are left out.
ResultRow combine_rows(const std::vector<ResultRow>& trials);

// Every (estimator, budget, trial) cell on a bounded worker pool, plus the
// combined rows, sorted.
std::vector<ResultRow> run_sweep(const ExperimentConfig& config, const Benchmark& bench,
                                 std::ostream* log = nullptr);

void sort_rows(std::vector<ResultRow>& rows);
void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

// ----- report

inline constexpr double kRmseThreshold = 10.0;

// Kass-Raftery strength of evidence for a log-ML difference in nats.
std::string kass_raftery_label(double nats);

struct ReportRow {
  std::string estimator;
  std::string budget_name;
  long budget_value = 0;
  int n_trials = 0;
  double mean = 0.0;      // mean of per-trial log estimates
  double combined = 0.0;  // combined estimate of the cell
  double mean_seconds = 0.0;
  std::optional<double> rmse;
  std::optional<std::string> evidence;  // label of |combined - truth|
};

struct Report {
  std::vector<ReportRow> rows;
  std::optional<double> truth;
  std::vector<std::string> accurate;  // estimators reaching RMSE < threshold at some budget
};

Report build_report(const std::vector<ResultRow>& rows, std::optional<double> truth);

// summary.txt, summary.csv and plots/<estimator>_{mean,rmse}.dat.
void write_report(const std::filesystem::path& dir, const Report& report);

}  // namespace mlbench
