#include "mlbench/bridge.hpp"

#include <algorithm>

#include "conditionals.hpp"
#include "model_detail.hpp"

namespace mlbench {

namespace {

template <class... Fs> struct Overload : Fs... { using Fs::operator()...; };
template <class... Fs> Overload(Fs...) -> Overload<Fs...>;

constexpr std::uint64_t kResampleStream = 0xffffffffULL;

}  // namespace

std::string direction_name(Direction d) {
  switch (d) {
    case Direction::Lower: return "lower";
    case Direction::Upper: return "upper";
    case Direction::None: return "none";
  }
  return "none";
}

Direction parse_direction(const std::string& name) {
  if (name == "lower") return Direction::Lower;
  if (name == "upper") return Direction::Upper;
  if (name == "none") return Direction::None;
  throw std::invalid_argument("unknown direction '" + name + "'");
}

std::string proposal_name(Proposal p) {
  return p == Proposal::Prior ? "prior" : "posterior";
}

ExactSample exact_sample_of(const ModelSpec& spec, const Simulation& sim, std::uint64_t seed) {
  return ExactSample{sim.state, true, seed, spec_hash(spec)};
}

void require_exact(const ExactSample& sample) {
  if (!sample.exact) {
    throw std::invalid_argument("reverse chain requires an exact posterior sample");
  }
}

AnnealingSchedule make_sigmoid_schedule(int T, double delta) {
  if (T < 2) throw std::invalid_argument("schedule needs T >= 2");
  if (!(delta > 0.0)) throw std::invalid_argument("schedule needs delta > 0");
  auto raw = [&](int t) {
    return 1.0 / (1.0 + std::exp(-delta * (2.0 * t / T - 1.0)));
  };
  const double lo = raw(1), hi = raw(T);
  AnnealingSchedule s{T, delta, std::vector<double>(T)};
  for (int t = 1; t <= T; ++t) s.betas[t - 1] = (raw(t) - lo) / (hi - lo);
  s.betas.front() = 0.0;
  s.betas.back() = 1.0;
  for (int t = 1; t < T; ++t) s.betas[t] = std::clamp(s.betas[t], s.betas[t - 1], 1.0);
  return s;
}

AnnealingSchedule make_schedule(std::vector<double> betas) {
  if (betas.size() < 2) throw std::invalid_argument("schedule needs T >= 2");
  if (betas.front() != 0.0 || betas.back() != 1.0) {
    throw std::invalid_argument("schedule must start at 0 and end at 1");
  }
  for (std::size_t t = 1; t < betas.size(); ++t) {
    if (betas[t] < betas[t - 1]) throw std::invalid_argument("schedule must be non-decreasing");
  }
  const int T = static_cast<int>(betas.size());
  return AnnealingSchedule{T, 0.0, std::move(betas)};
}

ChainResult ais_forward(const ModelSpec& spec, const Dataset& data,
                        const AnnealingSchedule& schedule, RngStream& rng,
                        const TransitionOptions& options) {
  check_data(spec, data);
  LatentState x = sample_prior(spec, rng);
  LogWeight w(0.0);
  const auto& b = schedule.betas;
  for (std::size_t t = 1; t < b.size(); ++t) {
    const double step = b[t] - b[t - 1];
    if (step != 0.0) w += step * log_likelihood(spec, x, data);
    x = gibbs_sweep(spec, x, data, b[t], rng, SweepDirection::Forward, options);
  }
  return {w, std::move(x)};
}

LogWeight ais_reverse(const ModelSpec& spec, const Dataset& data, const ExactSample& exact,
                      const AnnealingSchedule& schedule, RngStream& rng,
                      const TransitionOptions& options) {
  require_exact(exact);
  check_data(spec, data);
  LatentState x = exact.state;
  LogWeight w(0.0);
  const auto& b = schedule.betas;
  for (std::size_t t = b.size() - 1; t >= 1; --t) {
    const double step = b[t] - b[t - 1];
    if (step != 0.0) w += -step * log_likelihood(spec, x, data);
    if (t > 1) x = gibbs_sweep(spec, x, data, b[t - 1], rng, SweepDirection::Reverse, options);
  }
  return w;
}

std::vector<double> ais_forward_chains(const ModelSpec& spec, const Dataset& data,
                                       const AnnealingSchedule& schedule, int n_chains,
                                       const RngStream& rng) {
  if (n_chains < 1) throw std::invalid_argument("need at least one chain");
  std::vector<double> out(n_chains);
  for (int k = 0; k < n_chains; ++k) {
    RngStream r = rng.substream(k);
    out[k] = ais_forward(spec, data, schedule, r).log_weight.value();
  }
  return out;
}

std::vector<double> ais_reverse_chains(const ModelSpec& spec, const Dataset& data,
                                       const ExactSample& exact,
                                       const AnnealingSchedule& schedule, int n_chains,
                                       const RngStream& rng) {
  if (n_chains < 1) throw std::invalid_argument("need at least one chain");
  std::vector<double> out(n_chains);
  for (int k = 0; k < n_chains; ++k) {
    RngStream r = rng.substream(k);
    out[k] = -ais_reverse(spec, data, exact, schedule, r).value();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequential estimators

namespace {

// Particle state over the first i rows plus the continuous parameter.
// Clustering and binary weights only depend on the assignments; after
// changing the row set their parameter is redrawn from its exact conditional
// so that the uncollapsed sweeps start from the joint posterior.

LatentState empty_particle(const ModelSpec& spec, RngStream& rng) {
  return sample_prior(with_rows(spec, 0), rng);
}

void refresh_parameter(const ModelSpec& prefix_spec, LatentState& x, const Dataset& prefix,
                       RngStream& rng) {
  std::visit(Overload{
      [&](const ClusteringSpec& s) {
        auto& c = state_as(s, x);
        const auto st = detail::ClusterStats::from(c.z, prefix.Y, s.K);
        for (int k = 0; k < s.K; ++k) {
          c.theta.row(k) =
              cond::clustering_center(s, st.count[k], st.sum.row(k), 1.0, 1.0).sample(rng).transpose();
        }
      },
      [&](const LowRankSpec&) {},
      [&](const BinarySpec& s) {
        auto& b = state_as(s, x);
        b.A = cond::binary_a(s, b.Z, prefix.Y, 1.0, 1.0).sample(rng);
      }}, prefix_spec);
}

// log p(y_i | z_i, rows before i) for the prior proposal, or
// log p(y_i | rows before i) for the posterior proposal. state holds at
// least i rows; only the first i (and row i for the prior proposal) are read.
double row_increment(const ModelSpec& spec, const LatentState& x, const Dataset& data, int i,
                     Proposal proposal) {
  const auto row = data.Y.row(i);
  return std::visit(Overload{
      [&](const ClusteringSpec& s) {
        const auto& c = state_as(s, x);
        detail::ClusterStats st(s.K, s.D);
        for (int r = 0; r < i; ++r) st.add(c.z[r], data.Y.row(r));
        if (proposal == Proposal::Posterior) {
          return log_sum_exp(detail::collapsed_assignment_log_weights(s, st, row, s.noise_var));
        }
        return detail::cluster_predictive(s, st, c.z[i], row, s.noise_var);
      },
      [&](const LowRankSpec& s) {
        const auto& l = state_as(s, x);
        if (proposal == Proposal::Posterior) return detail::lowrank_row_marginal(s, l.V, row);
        const Eigen::RowVectorXd r = row - l.U.row(i) * l.V;
        return -0.5 * s.D * (kLog2Pi + std::log(s.noise_var)) - 0.5 * r.squaredNorm() / s.noise_var;
      },
      [&](const BinarySpec& s) {
        const auto& b = state_as(s, x);
        const auto post = detail::binary_posterior(s, b.Z.topRows(i), data.Y.topRows(i));
        if (proposal == Proposal::Posterior) {
          return log_sum_exp(detail::binary_row_log_weights(s, post, row));
        }
        return detail::binary_row_predictive(post, b.Z.row(i).transpose(), row);
      }}, spec);
}

// Adds row i to a particle holding i rows. Returns the weight increment.
double extend_row(const ModelSpec& spec, LatentState& x, const Dataset& data, int i,
                  Proposal proposal, RngStream& rng) {
  const auto row = data.Y.row(i);
  const ModelSpec next_spec = with_rows(spec, i + 1);
  const Dataset next = data.prefix(i + 1);
  double inc = 0.0;
  std::visit(Overload{
      [&](const ClusteringSpec& s) {
        auto& c = state_as(s, x);
        const auto st = detail::ClusterStats::from(c.z, data.Y.topRows(i), s.K);
        int k;
        if (proposal == Proposal::Posterior) {
          const auto w = detail::collapsed_assignment_log_weights(s, st, row, s.noise_var);
          inc = log_sum_exp(w);
          k = static_cast<int>(Categorical::from_log_weights(w).sample(rng));
        } else {
          k = static_cast<int>(Categorical(detail::mix_probs(s)).sample(rng));
          inc = detail::cluster_predictive(s, st, k, row, s.noise_var);
        }
        c.z.push_back(k);
      },
      [&](const LowRankSpec& s) {
        auto& l = state_as(s, x);
        Eigen::VectorXd u(s.K);
        if (proposal == Proposal::Posterior) {
          inc = detail::lowrank_row_marginal(s, l.V, row);
          u = cond::lowrank_u(s, l.V, Eigen::MatrixXd(row), 1.0, 1.0).sample(rng);
        } else {
          for (int k = 0; k < s.K; ++k) u[k] = std::sqrt(s.u_var) * rng.normal();
          const Eigen::RowVectorXd r = row - u.transpose() * l.V;
          inc = -0.5 * s.D * (kLog2Pi + std::log(s.noise_var)) - 0.5 * r.squaredNorm() / s.noise_var;
        }
        l.U.conservativeResize(i + 1, s.K);
        l.U.row(i) = u.transpose();
      },
      [&](const BinarySpec& s) {
        auto& b = state_as(s, x);
        const auto post = detail::binary_posterior(s, b.Z, data.Y.topRows(i));
        Eigen::VectorXd z;
        if (proposal == Proposal::Posterior) {
          const auto w = detail::binary_row_log_weights(s, post, row);
          inc = log_sum_exp(w);
          z = detail::bits_to_vector(
              static_cast<unsigned>(Categorical::from_log_weights(w).sample(rng)), s.K);
        } else {
          const auto& p = detail::attr_probs(s);
          z.resize(s.K);
          for (int k = 0; k < s.K; ++k) z[k] = rng.uniform() < p[k] ? 1.0 : 0.0;
          inc = detail::binary_row_predictive(post, z, row);
        }
        b.Z.conservativeResize(i + 1, s.K);
        b.Z.row(i) = z.transpose();
      }}, spec);
  refresh_parameter(next_spec, x, next, rng);
  return inc;
}

// Drops the last row (index i) of a particle holding i + 1 rows.
void retract_row(const ModelSpec& spec, LatentState& x, const Dataset& data, int i,
                 RngStream& rng) {
  std::visit(Overload{
      [&](const ClusteringSpec& s) { state_as(s, x).z.resize(i); },
      [&](const LowRankSpec& s) { state_as(s, x).U.conservativeResize(i, s.K); },
      [&](const BinarySpec& s) { state_as(s, x).Z.conservativeResize(i, s.K); }}, spec);
  refresh_parameter(with_rows(spec, i), x, data.prefix(i), rng);
}

double log_ess(const std::vector<double>& logw) {
  std::vector<double> sq(logw.size());
  for (std::size_t k = 0; k < logw.size(); ++k) sq[k] = 2.0 * logw[k];
  return 2.0 * log_sum_exp(logw) - log_sum_exp(sq);
}

// Multinomial resampling of particles in proportion to exp(log_probs).
void resample(std::vector<LatentState>& particles, const std::vector<double>& log_probs,
              RngStream& rng) {
  const auto c = Categorical::from_log_weights(log_probs);
  std::vector<LatentState> next;
  next.reserve(particles.size());
  for (std::size_t k = 0; k < particles.size(); ++k) next.push_back(particles[c.sample(rng)]);
  particles = std::move(next);
}

void check_smc_config(const SmcConfig& c) {
  if (c.n_particles < 1) throw std::invalid_argument("need at least one particle");
  if (c.sweeps_per_point < 0) throw std::invalid_argument("sweeps_per_point must be >= 0");
  if (!(c.resample_threshold >= 0.0 && c.resample_threshold <= 1.0)) {
    throw std::invalid_argument("invalid threshold: resample_threshold must lie in [0, 1]");
  }
}

}  // namespace

LogWeight smc_run(const ModelSpec& spec, const Dataset& data, const SmcConfig& config,
                  RngStream& rng) {
  check_smc_config(config);
  check_data(spec, data);
  const int P = config.n_particles;
  std::vector<RngStream> streams;
  for (int k = 0; k < P; ++k) streams.push_back(rng.substream(k));
  RngStream resampler = rng.substream(kResampleStream);
  std::vector<LatentState> particles;
  for (int k = 0; k < P; ++k) particles.push_back(empty_particle(spec, streams[k]));
  std::vector<double> logw(P, 0.0);
  for (int i = 0; i < data.N(); ++i) {
    const ModelSpec step_spec = with_rows(spec, i + 1);
    const Dataset step_data = data.prefix(i + 1);
    for (int k = 0; k < P; ++k) {
      logw[k] = (LogWeight(logw[k]) +
                 extend_row(spec, particles[k], data, i, config.proposal, streams[k])).value();
      for (int s = 0; s < config.sweeps_per_point; ++s) {
        particles[k] = gibbs_sweep(step_spec, particles[k], step_data, 1.0, streams[k]);
      }
    }
    if (P > 1 && log_ess(logw) < std::log(config.resample_threshold * P)) {
      resample(particles, logw, resampler);
      std::fill(logw.begin(), logw.end(), log_mean_exp(logw));
    }
  }
  return LogWeight(log_mean_exp(logw));
}

LogWeight shme_run(const ModelSpec& spec, const Dataset& data, const ExactSample& exact,
                   const SmcConfig& config, RngStream& rng) {
  require_exact(exact);
  check_smc_config(config);
  check_data(spec, data);
  check_state(spec, exact.state);
  const int P = config.n_particles;
  std::vector<RngStream> streams;
  for (int k = 0; k < P; ++k) streams.push_back(rng.substream(k));
  RngStream resampler = rng.substream(kResampleStream);
  std::vector<LatentState> particles(P, exact.state);
  std::vector<double> logw(P, 0.0);
  for (int i = data.N() - 1; i >= 0; --i) {
    const ModelSpec step_spec = with_rows(spec, i + 1);
    const Dataset step_data = data.prefix(i + 1);
    for (int k = 0; k < P; ++k) {
      for (int s = 0; s < config.sweeps_per_point; ++s) {
        particles[k] = gibbs_sweep(step_spec, particles[k], step_data, 1.0, streams[k]);
      }
      logw[k] = (LogWeight(logw[k]) +
                 row_increment(spec, particles[k], data, i, config.proposal)).value();
      retract_row(spec, particles[k], data, i, streams[k]);
    }
    if (P > 1) {
      std::vector<double> recip(P);
      for (int k = 0; k < P; ++k) recip[k] = -logw[k];
      if (log_ess(recip) < std::log(config.resample_threshold * P)) {
        resample(particles, recip, resampler);
        std::fill(logw.begin(), logw.end(), log_harmonic_mean_exp(logw));
      }
    }
  }
  return LogWeight(log_harmonic_mean_exp(logw));
}

SandwichResult bdmc_sandwich(const ModelSpec& spec, const Dataset& data,
                             const ExactSample& exact, const BridgeConfig& config,
                             int n_chains, const RngStream& rng) {
  require_exact(exact);
  if (n_chains < 1) throw std::invalid_argument("need at least one chain");
  SandwichResult r;
  const RngStream fwd = rng.substream(0), rev = rng.substream(1);
  std::string summary;
  if (const auto* sched = std::get_if<AnnealingSchedule>(&config)) {
    r.forward_values = ais_forward_chains(spec, data, *sched, n_chains, fwd);
    r.reverse_values = ais_reverse_chains(spec, data, exact, *sched, n_chains, rev);
    r.lower.estimator_id = "ais";
    r.upper.estimator_id = "reverse_ais";
    summary = "T=" + std::to_string(sched->T);
  } else {
    const auto& smc = std::get<SmcConfig>(config);
    for (int k = 0; k < n_chains; ++k) {
      RngStream a = fwd.substream(k), b = rev.substream(k);
      r.forward_values.push_back(smc_run(spec, data, smc, a).value());
      r.reverse_values.push_back(shme_run(spec, data, exact, smc, b).value());
    }
    r.lower.estimator_id = "smc";
    r.upper.estimator_id = "shme";
    summary = "sweeps=" + std::to_string(smc.sweeps_per_point) + " particles=" +
              std::to_string(smc.n_particles) + " proposal=" + proposal_name(smc.proposal);
  }
  r.lower.value = log_mean_exp(r.forward_values);
  r.upper.value = log_harmonic_mean_exp(r.reverse_values);
  r.lower.direction = Direction::Lower;
  r.upper.direction = Direction::Upper;
  r.lower.n_chains = r.upper.n_chains = n_chains;
  r.lower.trial_seed = r.upper.trial_seed = rng.seed();
  r.lower.config = r.upper.config = summary;
  r.gap = r.upper.value - r.lower.value;
  r.kl_bound = r.gap;
  return r;
}

}  // namespace mlbench
