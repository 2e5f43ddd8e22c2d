#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mlbench/models.hpp"
#include "mlbench/transitions.hpp"

namespace mlbench {

enum class Direction { Lower, Upper, None };
std::string direction_name(Direction d);
Direction parse_direction(const std::string& name);

struct LogEstimate {
  double value = 0.0;
  std::string estimator_id;
  Direction direction = Direction::None;
  std::uint64_t trial_seed = 0;
  int n_chains = 1;
  std::string config;  // e.g. "T=1000" or "sweeps=5"
};

// The sampled state of a simulation, tagged as an exact posterior draw for
// the dataset generated alongside it.
struct ExactSample {
  LatentState state;
  bool exact = false;
  std::uint64_t seed = 0;
  std::uint64_t spec_hash = 0;
};

ExactSample exact_sample_of(const ModelSpec& spec, const Simulation& sim, std::uint64_t seed);
void require_exact(const ExactSample& sample);

struct AnnealingSchedule {
  int T = 0;
  double delta = 0.0;
  std::vector<double> betas;  // betas[0] = 0, betas[T - 1] = 1
};

AnnealingSchedule make_sigmoid_schedule(int T, double delta = 4.0);
AnnealingSchedule make_schedule(std::vector<double> betas);

struct ChainResult {
  LogWeight log_weight;
  LatentState state;
};

ChainResult ais_forward(const ModelSpec& spec, const Dataset& data,
                        const AnnealingSchedule& schedule, RngStream& rng,
                        const TransitionOptions& options = {});

// Log of the reverse chain's weight, an unbiased estimate of 1/Z; the
// chain's upper estimate of log Z is its negation.
LogWeight ais_reverse(const ModelSpec& spec, const Dataset& data, const ExactSample& exact,
                      const AnnealingSchedule& schedule, RngStream& rng,
                      const TransitionOptions& options = {});

// Independent chains; chain k draws from rng.substream(k).
std::vector<double> ais_forward_chains(const ModelSpec& spec, const Dataset& data,
                                       const AnnealingSchedule& schedule, int n_chains,
                                       const RngStream& rng);
// Per-chain upper estimates (negated reverse weights), all from the same
// exact sample.
std::vector<double> ais_reverse_chains(const ModelSpec& spec, const Dataset& data,
                                       const ExactSample& exact,
                                       const AnnealingSchedule& schedule, int n_chains,
                                       const RngStream& rng);

enum class Proposal { Prior, Posterior };
std::string proposal_name(Proposal p);

struct SmcConfig {
  int n_particles = 1;
  int sweeps_per_point = 1;
  Proposal proposal = Proposal::Posterior;
  double resample_threshold = 0.5;  // resample when ESS < threshold * n_particles
};

// Particle learning over the rows of data; returns the log of the mean weight.
LogWeight smc_run(const ModelSpec& spec, const Dataset& data, const SmcConfig& config,
                  RngStream& rng);

// Sequential harmonic mean: rows deleted from the last to the first starting
// at the exact sample; returns the log estimate of Z (harmonic mean of weights).
LogWeight shme_run(const ModelSpec& spec, const Dataset& data, const ExactSample& exact,
                   const SmcConfig& config, RngStream& rng);

struct SandwichResult {
  LogEstimate lower;
  LogEstimate upper;
  double gap = 0.0;
  double kl_bound = 0.0;
  // Reverse chains share one exact sample and are therefore correlated.
  bool reverse_correlated = true;
  std::vector<double> forward_values;
  std::vector<double> reverse_values;
};

using BridgeConfig = std::variant<AnnealingSchedule, SmcConfig>;

// Forward chains use rng.substream(0), reverse chains rng.substream(1).
SandwichResult bdmc_sandwich(const ModelSpec& spec, const Dataset& data,
                             const ExactSample& exact, const BridgeConfig& config,
                             int n_chains, const RngStream& rng);

}  // namespace mlbench
