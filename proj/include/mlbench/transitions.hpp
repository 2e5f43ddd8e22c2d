#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mlbench/models.hpp"

namespace mlbench {

enum class SweepDirection { Forward, Reverse };

// Ordered list of site blocks visited by one sweep. Refresh blocks are
// drawn after the scan in either direction (an exact conditional draw of a
// parameter the scanned sites do not depend on).
struct SweepPlan {
  SweepDirection direction = SweepDirection::Forward;
  std::vector<std::string> sites;
  std::vector<std::string> refresh;

  SweepPlan reversed() const;
  friend bool operator==(const SweepPlan&, const SweepPlan&) = default;
};

// collapsed = true describes the sampler's operator (assignments with the
// centers integrated out for clustering); false the uncollapsed operator
// used by mode_sweep.
SweepPlan sweep_plan(const ModelSpec& spec, SweepDirection direction, bool collapsed = true);

struct TransitionOptions {
  // Inflates the noise variance inside one parameter conditional. Only the
  // validation controls set this; 1 is the correct sampler.
  double mutant_noise_scale = 1.0;
};

LatentState gibbs_sweep(const ModelSpec& spec, const LatentState& state, const Dataset& data,
                        double beta, RngStream& rng,
                        SweepDirection direction = SweepDirection::Forward,
                        const TransitionOptions& options = {});

// Mirror-order sweep at beta = 1; the reverse operator of the forward sweep.
LatentState reverse_sweep(const ModelSpec& spec, const LatentState& state,
                          const Dataset& data, RngStream& rng,
                          const TransitionOptions& options = {});

// Log density of one sweep moving from_state to to_state. Each site's
// conditional is evaluated at to_state's value given the partially updated
// state.
double sweep_transition_logprob(const ModelSpec& spec, const LatentState& from_state,
                                const LatentState& to_state, const Dataset& data,
                                double beta = 1.0,
                                SweepDirection direction = SweepDirection::Forward,
                                const TransitionOptions& options = {});

// Iterated conditional modes: every site set to its conditional mode, using
// the uncollapsed conditionals of the tempered joint.
LatentState mode_sweep(const ModelSpec& spec, const LatentState& state, const Dataset& data,
                       double beta = 1.0);

// Likelihood used by nested sampling: collapsed over the continuous
// parameter for clustering and binary, the full likelihood for low-rank.
double ns_log_likelihood(const ModelSpec& spec, const LatentState& state, const Dataset& data);

// Projects a state onto the space nested sampling explores. Clustering and
// binary drop the collapsed parameter (set to zero).
LatentState ns_project(const ModelSpec& spec, const LatentState& state);

// Likelihoods within this relative distance of a cutoff lie on its plateau
// (relabelled or repeated configurations share one likelihood value).
inline constexpr double kPlateauTolerance = 1e-12;

// A likelihood level. States on the cutoff's plateau are feasible only when
// plateau_feasible is set; nested sampling sets it from its tie-break draw.
struct NsLevel {
  double cutoff = kNegInf;
  bool plateau_feasible = false;
};

bool ns_on_plateau(double loglik, double cutoff);
bool ns_feasible(double loglik, const NsLevel& level);

// One sweep of single-site moves whose stationary law is the prior
// restricted to the feasible states of the level.
LatentState constrained_prior_step(const ModelSpec& spec, const LatentState& state,
                                   const Dataset& data, const NsLevel& level, RngStream& rng);
LatentState constrained_prior_step(const ModelSpec& spec, const LatentState& state,
                                   const Dataset& data, double cutoff, RngStream& rng);

// Conditional-consistency registry. Each entry draws a random triple
// (x, x', u) and reports log p(x|u) - log p(x'|u) next to
// log p(x,u) - log p(x',u) computed from the model's joint.
struct ConditionalTriple {
  double conditional_ratio;
  double joint_ratio;
};

struct ConditionalEntry {
  std::string name;
  ModelKind model;
  std::function<ConditionalTriple(const ModelSpec&, RngStream&, const TransitionOptions&,
                                  bool same_point)>
      draw;
};

const std::vector<ConditionalEntry>& conditional_registry();

// Names of every conditional the sweeps and constrained moves draw from.
std::vector<std::string> sweep_conditionals(ModelKind kind);

}  // namespace mlbench
