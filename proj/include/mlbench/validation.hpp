#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlbench/catalogue.hpp"
#include "mlbench/transitions.hpp"

namespace mlbench {

// ----- conditional consistency

inline constexpr double kConsistencyTolerance = 1e-8;

// |conditional_ratio - joint_ratio| / max(1, |joint_ratio|).
double consistency_error(const ConditionalTriple& t);

struct ConsistencyEntry {
  std::string name;
  int n_triples = 0;
  double worst = 0.0;
  bool pass = true;
};

struct ConsistencyReport {
  ModelKind model;
  std::vector<ConsistencyEntry> entries;
  bool pass = true;
};

// Every conditional the sweeps use for the model must be registered;
// otherwise "unregistered conditional".
void check_registry_complete(ModelKind kind);

// Triple j of entry e draws from rng.substream(e).substream(j); the first
// triple of every entry uses x = x'.
ConsistencyReport conditional_consistency_suite(const ModelSpec& spec, int n_triples,
                                                const RngStream& rng,
                                                const TransitionOptions& options = {});

// ----- Geweke

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
double kolmogorov_q(double lambda);

struct GewekeStatistic {
  std::string name;
  std::vector<double> forward;
  std::vector<double> chain;
  KsResult ks;
};

struct GewekeReport {
  std::vector<GewekeStatistic> statistics;
  double alpha = 1e-3;
  bool pass = true;
};

struct GewekeConfig {
  int n_samples = 1000;         // independent chains and forward draws
  int chain_length = 20;        // (sweeps, resample data) iterations per chain
  int sweeps_per_iteration = 1;
  double alpha = 1e-3;          // family-wise, Bonferroni across statistics
  TransitionOptions options;
};

// Names of the tracked statistics: data mean, data variance, latent
// occupancy, parameter norm.
std::vector<std::string> geweke_statistic_names();
std::vector<double> geweke_statistics(const ModelSpec& spec, const LatentState& state,
                                      const Dataset& data);

// Forward draw j uses rng.substream(0).substream(j) and chain j
// rng.substream(1).substream(j). Each chain starts from its own forward joint
// draw and contributes only its final state.
GewekeReport geweke_test(const ModelSpec& spec, const GewekeConfig& config, const RngStream& rng);

// ----- bound audit

struct BoundAuditRow {
  double b = 0.0;
  double rate = 0.0;
  double cap = 0.0;
  bool violated = false;
};

struct BoundAudit {
  std::string estimator_id;
  Direction direction = Direction::None;
  std::vector<BoundAuditRow> rows;
  bool pass = true;
};

inline constexpr double kAuditSlack = 0.05;

// Lower bounds violate when estimate > truth + b, upper bounds when
// estimate < truth - b; a row fails when its rate exceeds e^{-b} + slack.
BoundAudit bound_violation_audit(std::span<const LogEstimate> estimates, double truth,
                                 std::span<const double> b_values);

// ----- cross-estimator agreement

struct AgreementBudget {
  long ais_T = 2000;
  int ais_chains = 5;
  long smc_sweeps = 20;
  int smc_trials = 5;
  long ns_steps = 20;
  int ns_trials = 10;
  long cms_transitions = 2000;
};

struct AgreementReport {
  std::vector<std::string> estimators;
  std::vector<double> values;
  std::optional<double> truth;
  double max_discrepancy = 0.0;  // pairwise, and against truth when present
  bool pass = true;
};

inline constexpr double kAgreementTolerance = 2.0;

AgreementReport cross_estimator_agreement(const ModelSpec& spec, const Dataset& data,
                                          const ExactSample& exact,
                                          std::span<const EstimatorKind> estimators,
                                          const AgreementBudget& budget, const RngStream& rng,
                                          std::optional<double> truth = std::nullopt);

}  // namespace mlbench
