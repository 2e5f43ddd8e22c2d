#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mlbench/bridge.hpp"
#include "mlbench/models.hpp"

namespace mlbench {

// Sample k is the prior draw of rng.substream(k).
LogEstimate likelihood_weighting(const ModelSpec& spec, const Dataset& data, int n_samples,
                                 const RngStream& rng);

// Posterior Gibbs chain from the exact sample; one likelihood value after
// every sweeps_between sweeps.
LogEstimate harmonic_mean(const ModelSpec& spec, const Dataset& data, const ExactSample& exact,
                          int n_samples, int sweeps_between, RngStream& rng);

inline constexpr int kMapSearchSweeps = 500;

struct MapResult {
  LatentState state;
  double log_joint = 0.0;
};

// Annealed Gibbs from a prior draw followed by iterated conditional modes;
// returns the highest-joint state visited.
MapResult map_search(const ModelSpec& spec, const Dataset& data, int n_sweeps, RngStream& rng);

// Number of continuous parameters counted by the information criterion.
int bic_parameter_count(const ModelSpec& spec);
double bic_value(const ModelSpec& spec, double log_likelihood, int n_rows);

LogEstimate bic(const ModelSpec& spec, const Dataset& data, int n_map_sweeps, RngStream& rng);

// Chain start from one reverse sweep at the star point, followed by
// n_transitions forward sweeps; all n_transitions + 1 points enter the
// average of transition densities into the star point.
LogEstimate cms_at(const ModelSpec& spec, const Dataset& data, const LatentState& star,
                   int n_transitions, RngStream& rng);
LogEstimate cms(const ModelSpec& spec, const Dataset& data, int n_transitions, RngStream& rng,
                int n_map_sweeps = kMapSearchSweeps);

struct NestedSamplingConfig {
  int n_particles = 2;
  int mcmc_steps = 20;
  double stop_ratio = 1.0 + 1e-10;
  long max_steps = 1000000;
};

struct NestedSamplingTrace {
  std::vector<double> cutoffs;  // log likelihood removed at step t
  std::vector<double> volumes;  // (K/(K+1))^t
  int n_particles = 2;
  double stop_ratio = 1.0;
  double log_remainder = kNegInf;  // V_S times the mean live likelihood
  double log_upper = kNegInf;      // sum with each shell at its outer cutoff
};

struct NestedSamplingResult {
  LogEstimate estimate;
  NestedSamplingTrace trace;
};

double ns_volume(int n_particles, long t);

NestedSamplingResult nested_sampling(const ModelSpec& spec, const Dataset& data,
                                     const NestedSamplingConfig& config, RngStream& rng);

// Mean-field factors.
struct ClusteringVB {
  Eigen::MatrixXd log_r;  // N x K normalized log responsibilities
  Eigen::MatrixXd mean;   // K x D
  Eigen::VectorXd var;    // K, isotropic per center
};

struct LowRankVB {
  Eigen::MatrixXd u_mean;  // N x K
  Eigen::MatrixXd u_cov;   // K x K, shared by every row
  Eigen::MatrixXd v_mean;  // K x D
  Eigen::MatrixXd v_cov;   // K x K, shared by every column
};

struct BinaryVB {
  Eigen::MatrixXd logit;  // N x K, +-inf where the prior is degenerate
  Eigen::MatrixXd mean;   // K x D
  Eigen::VectorXd var;    // K, isotropic per row of A
};

using VariationalPosterior = std::variant<ClusteringVB, LowRankVB, BinaryVB>;

double vb_bound(const ModelSpec& spec, const Dataset& data, const VariationalPosterior& q);

// Largest bound increase produced by moving a single factor parameter by
// +-step (logits, means, variances and covariance entries).
double vb_perturbation_gain(const ModelSpec& spec, const Dataset& data,
                            const VariationalPosterior& q, double step = 1e-3);

struct VbConfig {
  int n_restarts = 1;
  double min_improvement = 0.01;  // nats over window iterations
  int window = 50;
  int max_iterations = 100000;
  double monotonic_tolerance = 1e-6;
};

struct VbResult {
  LogEstimate bound;
  LogEstimate corrected;  // bound + ln K!
  VariationalPosterior posterior;
  std::vector<double> restart_bounds;
};

// One restart: initialization from rng followed by coordinate ascent.
// trace, if given, receives the bound after every block update.
VariationalPosterior vb_optimize(const ModelSpec& spec, const Dataset& data, const VbConfig& config,
                                 RngStream& rng, std::vector<double>* trace = nullptr);

// Restart r uses rng.substream(r).
VbResult variational_bayes(const ModelSpec& spec, const Dataset& data, const VbConfig& config,
                           const RngStream& rng);

}  // namespace mlbench
