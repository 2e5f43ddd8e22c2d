#include "mlbench/transitions.hpp"

#include "conditionals.hpp"
#include "model_detail.hpp"

namespace mlbench {

namespace {

template <class... Fs> struct Overload : Fs... { using Fs::operator()...; };
template <class... Fs> Overload(Fs...) -> Overload<Fs...>;

enum class Mode { Sample, Argmax, Score };

// Decides each site's new value: a draw, the conditional mode, or the value
// held by a target state (accumulating its log density).
struct SiteChooser {
  Mode mode;
  RngStream* rng = nullptr;
  double log_prob = 0.0;

  std::size_t pick(const Categorical& c, std::size_t target) {
    switch (mode) {
      case Mode::Sample: return c.sample(*rng);
      case Mode::Argmax: return c.mode();
      case Mode::Score: log_prob += c.log_density(target); return target;
    }
    return target;
  }
  int pick(const Bernoulli& b, int target) {
    switch (mode) {
      case Mode::Sample: return b.sample(*rng);
      case Mode::Argmax: return b.p() > 0.5 ? 1 : 0;
      case Mode::Score: log_prob += b.log_density(target); return target;
    }
    return target;
  }
  Eigen::VectorXd pick(const SphericalGaussian& g, const Eigen::VectorXd& target) {
    switch (mode) {
      case Mode::Sample: return g.sample(*rng);
      case Mode::Argmax: return g.mean();
      case Mode::Score: log_prob += g.log_density(target); return target;
    }
    return target;
  }
  Eigen::MatrixXd pick(const SharedPrecisionColumns& g, const Eigen::MatrixXd& target) {
    switch (mode) {
      case Mode::Sample: return g.sample(*rng);
      case Mode::Argmax: return g.means();
      case Mode::Score: log_prob += g.log_density(target); return target;
    }
    return target;
  }
};

bool forward(SweepDirection d) { return d == SweepDirection::Forward; }

void clustering_tempered(const ClusteringSpec& s, ClusteringState& x, const Dataset& d,
                         double beta, SweepDirection dir, SiteChooser& ch,
                         const ClusteringState* target, const TransitionOptions& opt) {
  auto update_z = [&](int i) {
    const auto c = cond::clustering_assignment(s, x.theta, d.Y.row(i), beta);
    x.z[i] = static_cast<int>(ch.pick(c, target ? target->z[i] : 0));
  };
  auto update_theta = [&](const detail::ClusterStats& st, int k) {
    const auto g = cond::clustering_center(s, st.count[k], st.sum.row(k), beta,
                                           opt.mutant_noise_scale);
    const Eigen::VectorXd t = target ? Eigen::VectorXd(target->theta.row(k).transpose())
                                     : Eigen::VectorXd();
    x.theta.row(k) = ch.pick(g, t).transpose();
  };
  if (forward(dir)) {
    for (int i = 0; i < s.N; ++i) update_z(i);
    const auto st = detail::ClusterStats::from(x.z, d.Y, s.K);
    for (int k = 0; k < s.K; ++k) update_theta(st, k);
  } else {
    const auto st = detail::ClusterStats::from(x.z, d.Y, s.K);
    for (int k = s.K - 1; k >= 0; --k) update_theta(st, k);
    for (int i = s.N - 1; i >= 0; --i) update_z(i);
  }
}

// Assignments with the centers integrated out, then a fresh draw of the
// centers from their conditional under f_beta.
void clustering_collapsed(const ClusteringSpec& s, ClusteringState& x, const Dataset& d,
                          double beta, SweepDirection dir, SiteChooser& ch,
                          const ClusteringState* target, const TransitionOptions& opt) {
  auto st = detail::ClusterStats::from(x.z, d.Y, s.K);
  auto update_z = [&](int i) {
    st.remove(x.z[i], d.Y.row(i));
    const auto c = cond::clustering_collapsed_assignment(s, st, d.Y.row(i), beta);
    x.z[i] = static_cast<int>(ch.pick(c, target ? target->z[i] : 0));
    st.add(x.z[i], d.Y.row(i));
  };
  if (forward(dir)) {
    for (int i = 0; i < s.N; ++i) update_z(i);
  } else {
    for (int i = s.N - 1; i >= 0; --i) update_z(i);
  }
  for (int k = 0; k < s.K; ++k) {
    const auto g = cond::clustering_center(s, st.count[k], st.sum.row(k), beta,
                                           opt.mutant_noise_scale);
    const Eigen::VectorXd t = target ? Eigen::VectorXd(target->theta.row(k).transpose())
                                     : Eigen::VectorXd();
    x.theta.row(k) = ch.pick(g, t).transpose();
  }
}

void lowrank_sweep(const LowRankSpec& s, LowRankState& x, const Dataset& d, double beta,
                   SweepDirection dir, SiteChooser& ch, const LowRankState* target,
                   const TransitionOptions& opt) {
  auto update_u = [&] {
    const auto g = cond::lowrank_u(s, x.V, d.Y, beta, opt.mutant_noise_scale);
    const Eigen::MatrixXd t = target ? Eigen::MatrixXd(target->U.transpose()) : Eigen::MatrixXd();
    x.U = ch.pick(g, t).transpose();
  };
  auto update_v = [&] {
    const auto g = cond::lowrank_v(s, x.U, d.Y, beta);
    x.V = ch.pick(g, target ? target->V : Eigen::MatrixXd());
  };
  if (forward(dir)) {
    update_u();
    update_v();
  } else {
    update_v();
    update_u();
  }
}

void binary_sweep(const BinarySpec& s, BinaryState& x, const Dataset& d, double beta,
                  SweepDirection dir, SiteChooser& ch, const BinaryState* target,
                  const TransitionOptions& opt) {
  auto update_sites = [&](bool ascending) {
    Eigen::MatrixXd R = d.Y - x.Z * x.A;
    for (int n = 0; n < s.N * s.K; ++n) {
      const int idx = ascending ? n : s.N * s.K - 1 - n;
      const int i = idx / s.K, k = idx % s.K;
      Eigen::RowVectorXd r = R.row(i) + x.Z(i, k) * x.A.row(k);
      const auto b = cond::binary_site(s, k, x.A.row(k), r, beta);
      const int z = ch.pick(b, target ? static_cast<int>(target->Z(i, k)) : 0);
      x.Z(i, k) = z;
      if (z) r -= x.A.row(k);
      R.row(i) = r;
    }
  };
  auto update_a = [&] {
    const auto g = cond::binary_a(s, x.Z, d.Y, beta, opt.mutant_noise_scale);
    x.A = ch.pick(g, target ? target->A : Eigen::MatrixXd());
  };
  if (forward(dir)) {
    update_sites(true);
    update_a();
  } else {
    update_a();
    update_sites(false);
  }
}

// Sites with A integrated out, then a fresh draw of A from its conditional
// under f_beta.
void binary_collapsed(const BinarySpec& s, BinaryState& x, const Dataset& d, double beta,
                      SweepDirection dir, SiteChooser& ch, const BinaryState* target,
                      const TransitionOptions& opt) {
  Eigen::MatrixXd ztz = x.Z.transpose() * x.Z;
  Eigen::MatrixXd zty = x.Z.transpose() * d.Y;
  auto update_row = [&](int i, bool ascending) {
    const Eigen::RowVectorXd y = d.Y.row(i);
    Eigen::RowVectorXd z = x.Z.row(i);
    ztz -= z.transpose() * z;
    zty -= z.transpose() * y;
    const cond::BinaryCollapsedRow row(s, ztz, zty, y, beta);
    for (int n = 0; n < s.K; ++n) {
      const int k = ascending ? n : s.K - 1 - n;
      z(k) = ch.pick(row.site(z, k), target ? static_cast<int>(target->Z(i, k)) : 0);
    }
    x.Z.row(i) = z;
    ztz += z.transpose() * z;
    zty += z.transpose() * y;
  };
  if (forward(dir)) {
    for (int i = 0; i < s.N; ++i) update_row(i, true);
  } else {
    for (int i = s.N - 1; i >= 0; --i) update_row(i, false);
  }
  const auto g = cond::binary_a(s, x.Z, d.Y, beta, opt.mutant_noise_scale);
  x.A = ch.pick(g, target ? target->A : Eigen::MatrixXd());
}

// collapsed selects the sampler's operators for clustering and binary; the
// uncollapsed ones serve iterated conditional modes.
LatentState run_sweep(const ModelSpec& spec, const LatentState& state, const Dataset& data,
                      double beta, SweepDirection dir, SiteChooser& ch,
                      const LatentState* target, const TransitionOptions& opt, bool collapsed) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta out of range");
  check_state(spec, state);
  check_data(spec, data);
  if (target) check_state(spec, *target);
  LatentState out = state;
  std::visit(Overload{
      [&](const ClusteringSpec& s) {
        auto& x = state_as(s, out);
        const ClusteringState* t = target ? &state_as(s, *target) : nullptr;
        if (collapsed) {
          clustering_collapsed(s, x, data, beta, dir, ch, t, opt);
        } else {
          clustering_tempered(s, x, data, beta, dir, ch, t, opt);
        }
      },
      [&](const LowRankSpec& s) {
        lowrank_sweep(s, state_as(s, out), data, beta, dir, ch,
                      target ? &state_as(s, *target) : nullptr, opt);
      },
      [&](const BinarySpec& s) {
        auto& x = state_as(s, out);
        const BinaryState* t = target ? &state_as(s, *target) : nullptr;
        if (collapsed) {
          binary_collapsed(s, x, data, beta, dir, ch, t, opt);
        } else {
          binary_sweep(s, x, data, beta, dir, ch, t, opt);
        }
      }}, spec);
  return out;
}

std::vector<std::string> indexed(const std::string& name, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(name + "[" + std::to_string(i) + "]");
  return out;
}

}  // namespace

SweepPlan SweepPlan::reversed() const {
  SweepPlan p = *this;
  p.direction = forward(direction) ? SweepDirection::Reverse : SweepDirection::Forward;
  std::reverse(p.sites.begin(), p.sites.end());
  return p;
}

SweepPlan sweep_plan(const ModelSpec& spec, SweepDirection direction, bool collapsed) {
  SweepPlan plan;
  std::visit(Overload{
      [&](const ClusteringSpec& s) {
        plan.sites = indexed("z", s.N);
        if (collapsed) {
          plan.refresh = {"theta"};
        } else {
          auto t = indexed("theta", s.K);
          plan.sites.insert(plan.sites.end(), t.begin(), t.end());
        }
      },
      [&](const LowRankSpec&) { plan.sites = {"U", "V"}; },
      [&](const BinarySpec& s) {
        for (int i = 0; i < s.N; ++i)
          for (int k = 0; k < s.K; ++k)
            plan.sites.push_back("Z[" + std::to_string(i) + "," + std::to_string(k) + "]");
        if (collapsed) {
          plan.refresh = {"A"};
        } else {
          plan.sites.push_back("A");
        }
      }}, spec);
  return forward(direction) ? plan : plan.reversed();
}

LatentState gibbs_sweep(const ModelSpec& spec, const LatentState& state, const Dataset& data,
                        double beta, RngStream& rng, SweepDirection direction,
                        const TransitionOptions& options) {
  SiteChooser ch{Mode::Sample, &rng};
  return run_sweep(spec, state, data, beta, direction, ch, nullptr, options, true);
}

LatentState reverse_sweep(const ModelSpec& spec, const LatentState& state, const Dataset& data,
                          RngStream& rng, const TransitionOptions& options) {
  return gibbs_sweep(spec, state, data, 1.0, rng, SweepDirection::Reverse, options);
}

double sweep_transition_logprob(const ModelSpec& spec, const LatentState& from_state,
                                const LatentState& to_state, const Dataset& data, double beta,
                                SweepDirection direction, const TransitionOptions& options) {
  SiteChooser ch{Mode::Score};
  run_sweep(spec, from_state, data, beta, direction, ch, &to_state, options, true);
  return ch.log_prob;
}

LatentState mode_sweep(const ModelSpec& spec, const LatentState& state, const Dataset& data,
                       double beta) {
  SiteChooser ch{Mode::Argmax};
  return run_sweep(spec, state, data, beta, SweepDirection::Forward, ch, nullptr, {}, false);
}

double ns_log_likelihood(const ModelSpec& spec, const LatentState& state, const Dataset& data) {
  if (kind(spec) == ModelKind::LowRank) return log_likelihood(spec, state, data);
  return collapsed_log_likelihood(spec, state, data);
}

LatentState ns_project(const ModelSpec& spec, const LatentState& state) {
  LatentState out = state;
  std::visit(Overload{
      [&](const ClusteringSpec& s) { state_as(s, out).theta.setZero(); },
      [&](const LowRankSpec&) {},
      [&](const BinarySpec& s) { state_as(s, out).A.setZero(); }}, spec);
  return out;
}

namespace {

// Prior restricted to sites whose likelihood clears the cutoff. The current
// value always counts as feasible so rounding can never empty the support.
Categorical restricted_prior(const std::vector<double>& log_prior,
                             const std::vector<double>& logliks, const NsLevel& level,
                             std::size_t current) {
  std::vector<double> w(log_prior.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = (ns_feasible(logliks[k], level) || k == current) ? log_prior[k] : kNegInf;
  }
  return Categorical::from_log_weights(w);
}

// Per-cluster marginals after removing row i, and the resulting likelihood
// for each possible assignment of row i.
std::vector<double> clustering_site_logliks(const ClusteringSpec& s,
                                            const detail::ClusterStats& without,
                                            const std::vector<double>& marg_without,
                                            const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  double rest = 0.0;
  for (double m : marg_without) rest += m;
  std::vector<double> L(s.K);
  for (int k = 0; k < s.K; ++k) {
    const double with = cluster_log_marginal(s, without.count[k] + 1.0,
                                             without.sum.row(k) + row,
                                             without.sum_sq[k] + row.squaredNorm(), s.noise_var);
    L[k] = rest - marg_without[k] + with;
  }
  return L;
}

double marginal_of(const ClusteringSpec& s, const detail::ClusterStats& st, int k) {
  return cluster_log_marginal(s, st.count[k], st.sum.row(k), st.sum_sq[k], s.noise_var);
}

void constrained_clustering(const ClusteringSpec& s, ClusteringState& x, const Dataset& d,
                            const NsLevel& level, RngStream& rng) {
  const auto& pi = detail::mix_probs(s);
  std::vector<double> log_pi(s.K);
  for (int k = 0; k < s.K; ++k) log_pi[k] = pi[k] > 0.0 ? std::log(pi[k]) : kNegInf;
  auto st = detail::ClusterStats::from(x.z, d.Y, s.K);
  std::vector<double> marg(s.K);
  for (int k = 0; k < s.K; ++k) marg[k] = marginal_of(s, st, k);
  for (int i = 0; i < s.N; ++i) {
    const int k0 = x.z[i];
    st.remove(k0, d.Y.row(i));
    marg[k0] = marginal_of(s, st, k0);
    const auto L = clustering_site_logliks(s, st, marg, d.Y.row(i));
    const auto c = restricted_prior(log_pi, L, level, static_cast<std::size_t>(k0));
    const int k1 = static_cast<int>(c.sample(rng));
    x.z[i] = k1;
    st.add(k1, d.Y.row(i));
    marg[k1] = marginal_of(s, st, k1);
  }
}

void constrained_binary(const BinarySpec& s, BinaryState& x, const Dataset& d,
                        const NsLevel& level, RngStream& rng) {
  const auto& p = detail::attr_probs(s);
  for (int i = 0; i < s.N; ++i) {
    for (int k = 0; k < s.K; ++k) {
      const int z0 = static_cast<int>(x.Z(i, k));
      std::vector<double> L(2);
      for (int v = 0; v < 2; ++v) {
        x.Z(i, k) = v;
        L[v] = factor_gaussian_log_marginal(d.Y, x.Z, s.a_var, s.noise_var);
      }
      const std::vector<double> lp = {std::log1p(-p[k]), p[k] > 0.0 ? std::log(p[k]) : kNegInf};
      x.Z(i, k) = static_cast<double>(restricted_prior(lp, L, level, z0).sample(rng));
    }
  }
}

// Interval of t where ||c - t v||^2 < budget, intersected with a point that
// is known to be feasible.
cond::TruncatedGaussian feasible_interval(const Eigen::Ref<const Eigen::VectorXd>& c,
                                          const Eigen::Ref<const Eigen::VectorXd>& v,
                                          double budget, double current, double prior_var) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double a = v.squaredNorm();
  if (a == 0.0 || budget == kInf) return {prior_var, -kInf, kInf};
  const double b = c.dot(v);
  const double disc = b * b - a * (c.squaredNorm() - budget);
  if (!(disc > 0.0)) return {prior_var, current, current};
  const double root = std::sqrt(disc);
  return {prior_var, std::min((b - root) / a, current), std::max((b + root) / a, current)};
}

void constrained_lowrank(const LowRankSpec& s, LowRankState& x, const Dataset& d, double cutoff,
                         RngStream& rng) {
  Eigen::MatrixXd R = d.Y - x.U * x.V;
  const double inv2n = 1.0 / (2.0 * s.noise_var);
  double L = -0.5 * static_cast<double>(R.size()) * (kLog2Pi + std::log(s.noise_var)) -
             inv2n * R.squaredNorm();
  // budget is the largest squared residual norm of the updated line that
  // keeps the total log-likelihood above the cutoff.
  auto budget = [&](double current_sq) {
    if (cutoff == kNegInf) return std::numeric_limits<double>::infinity();
    return current_sq + (L - cutoff) / inv2n;
  };
  for (int i = 0; i < s.N; ++i) {
    for (int k = 0; k < s.K; ++k) {
      const double old_sq = R.row(i).squaredNorm();
      const Eigen::VectorXd c = (R.row(i) + x.U(i, k) * x.V.row(k)).transpose();
      const Eigen::VectorXd v = x.V.row(k).transpose();
      const auto tg = feasible_interval(c, v, budget(old_sq), x.U(i, k), s.u_var);
      const double t = tg.sample(rng);
      const Eigen::RowVectorXd r = (c - t * v).transpose();
      const double L_new = L + inv2n * (old_sq - r.squaredNorm());
      if (L_new > cutoff || cutoff == kNegInf) {
        x.U(i, k) = t;
        R.row(i) = r;
        L = L_new;
      }
    }
  }
  for (int k = 0; k < s.K; ++k) {
    for (int j = 0; j < s.D; ++j) {
      const double old_sq = R.col(j).squaredNorm();
      const Eigen::VectorXd c = R.col(j) + x.V(k, j) * x.U.col(k);
      const Eigen::VectorXd u = x.U.col(k);
      const auto tg = feasible_interval(c, u, budget(old_sq), x.V(k, j), s.v_var);
      const double t = tg.sample(rng);
      const Eigen::VectorXd r = c - t * u;
      const double L_new = L + inv2n * (old_sq - r.squaredNorm());
      if (L_new > cutoff || cutoff == kNegInf) {
        x.V(k, j) = t;
        R.col(j) = r;
        L = L_new;
      }
    }
  }
}

}  // namespace

bool ns_on_plateau(double loglik, double cutoff) {
  return std::abs(loglik - cutoff) <= kPlateauTolerance * std::max(1.0, std::abs(cutoff));
}

bool ns_feasible(double loglik, const NsLevel& level) {
  if (level.cutoff == kNegInf) return true;
  if (ns_on_plateau(loglik, level.cutoff)) return level.plateau_feasible;
  return loglik > level.cutoff;
}

LatentState constrained_prior_step(const ModelSpec& spec, const LatentState& state,
                                   const Dataset& data, double cutoff, RngStream& rng) {
  return constrained_prior_step(spec, state, data, NsLevel{cutoff, false}, rng);
}

LatentState constrained_prior_step(const ModelSpec& spec, const LatentState& state,
                                   const Dataset& data, const NsLevel& level, RngStream& rng) {
  const double cutoff = level.cutoff;
  if (std::isnan(cutoff) || cutoff == std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("cutoff must be finite or -inf");
  }
  if (!ns_feasible(ns_log_likelihood(spec, state, data), level)) {
    throw std::domain_error("infeasible start");
  }
  LatentState out = state;
  std::visit(Overload{
      [&](const ClusteringSpec& s) { constrained_clustering(s, state_as(s, out), data, level, rng); },
      [&](const LowRankSpec& s) { constrained_lowrank(s, state_as(s, out), data, cutoff, rng); },
      [&](const BinarySpec& s) { constrained_binary(s, state_as(s, out), data, level, rng); }},
      spec);
  // Site moves track the likelihood incrementally; a move that clears the
  // cutoff only by rounding is undone.
  if (!ns_feasible(ns_log_likelihood(spec, out, data), level)) return state;
  return out;
}

// ---------------------------------------------------------------------------
// Conditional-consistency registry

namespace {

constexpr const char* kClusterAssign = "clustering: z_i | theta (tempered)";
constexpr const char* kClusterCenter = "clustering: theta_k | z (tempered)";
constexpr const char* kClusterCollapsed = "clustering: z_i | z_-i (collapsed)";
constexpr const char* kClusterConstrained = "clustering: z_i | z_-i (constrained prior)";
constexpr const char* kLowRankU = "lowrank: U | V (tempered)";
constexpr const char* kLowRankV = "lowrank: V | U (tempered)";
constexpr const char* kLowRankConstrainedU = "lowrank: U_ik | rest (constrained prior)";
constexpr const char* kLowRankConstrainedV = "lowrank: V_kj | rest (constrained prior)";
constexpr const char* kBinarySite = "binary: z_ik | rest (tempered)";
constexpr const char* kBinaryA = "binary: A | Z (tempered)";
constexpr const char* kBinaryCollapsed = "binary: z_ik | Z_-ik (collapsed)";
constexpr const char* kBinaryConstrained = "binary: z_ik | rest (constrained prior)";

template <class Spec>
std::pair<Spec, Simulation> random_instance(const ModelSpec& spec, RngStream& rng) {
  const ModelSpec s = validated(spec);
  const auto* typed = std::get_if<Spec>(&s);
  if (!typed) throw std::invalid_argument("registry entry used with another model");
  return {*typed, simulate(s, rng)};
}

Eigen::MatrixXd jitter(const Eigen::MatrixXd& m, double scale, RngStream& rng) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] += scale * rng.normal();
  return out;
}

ConditionalTriple cluster_assign(const ModelSpec& spec, RngStream& rng, const TransitionOptions&,
                                 bool same) {
  auto [s, sim] = random_instance<ClusteringSpec>(spec, rng);
  const double beta = rng.uniform();
  const int i = static_cast<int>(rng.uniform_index(s.N));
  const int k1 = static_cast<int>(rng.uniform_index(s.K));
  const int k2 = same ? k1 : static_cast<int>(rng.uniform_index(s.K));
  auto& x = std::get<ClusteringState>(sim.state);
  const auto c = cond::clustering_assignment(s, x.theta, sim.data.Y.row(i), beta);
  LatentState a = x, b = x;
  std::get<ClusteringState>(a).z[i] = k1;
  std::get<ClusteringState>(b).z[i] = k2;
  return {c.log_density(k1) - c.log_density(k2),
          tempered_log_f(s, a, sim.data, beta) - tempered_log_f(s, b, sim.data, beta)};
}

ConditionalTriple cluster_center(const ModelSpec& spec, RngStream& rng,
                                 const TransitionOptions& opt, bool same) {
  auto [s, sim] = random_instance<ClusteringSpec>(spec, rng);
  const double beta = rng.uniform();
  const int k = static_cast<int>(rng.uniform_index(s.K));
  const auto& x = std::get<ClusteringState>(sim.state);
  const auto st = detail::ClusterStats::from(x.z, sim.data.Y, s.K);
  const auto g = cond::clustering_center(s, st.count[k], st.sum.row(k), beta,
                                         opt.mutant_noise_scale);
  LatentState a = x, b = x;
  auto& tb = std::get<ClusteringState>(b).theta;
  if (!same) tb.row(k) = jitter(tb.row(k), 0.5, rng);
  const Eigen::VectorXd va = x.theta.row(k).transpose(), vb = tb.row(k).transpose();
  return {g.log_density(va) - g.log_density(vb),
          tempered_log_f(s, a, sim.data, beta) - tempered_log_f(s, b, sim.data, beta)};
}

ConditionalTriple cluster_collapsed(const ModelSpec& spec, RngStream& rng,
                                    const TransitionOptions&, bool same) {
  auto [s, sim] = random_instance<ClusteringSpec>(spec, rng);
  const int i = static_cast<int>(rng.uniform_index(s.N));
  const int k1 = static_cast<int>(rng.uniform_index(s.K));
  const int k2 = same ? k1 : static_cast<int>(rng.uniform_index(s.K));
  auto& x = std::get<ClusteringState>(sim.state);
  // f_beta with the centers integrated out equals the collapsed joint at
  // noise variance noise_var / beta, up to a factor free of z.
  const double beta = 1.0 - rng.uniform();
  ClusteringSpec sb = s;
  sb.noise_var = s.noise_var / beta;
  auto st = detail::ClusterStats::from(x.z, sim.data.Y, s.K);
  st.remove(x.z[i], sim.data.Y.row(i));
  const auto c = cond::clustering_collapsed_assignment(s, st, sim.data.Y.row(i), beta);
  LatentState a = x, b = x;
  std::get<ClusteringState>(a).z[i] = k1;
  std::get<ClusteringState>(b).z[i] = k2;
  return {c.log_density(k1) - c.log_density(k2),
          collapsed_log_joint(sb, a, sim.data) - collapsed_log_joint(sb, b, sim.data)};
}

ConditionalTriple cluster_constrained(const ModelSpec& spec, RngStream& rng,
                                      const TransitionOptions&, bool same) {
  auto [s, sim] = random_instance<ClusteringSpec>(spec, rng);
  const int i = static_cast<int>(rng.uniform_index(s.N));
  const int k1 = static_cast<int>(rng.uniform_index(s.K));
  const int k2 = same ? k1 : static_cast<int>(rng.uniform_index(s.K));
  auto& x = std::get<ClusteringState>(sim.state);
  LatentState a = x, b = x;
  std::get<ClusteringState>(a).z[i] = k1;
  std::get<ClusteringState>(b).z[i] = k2;
  const double cutoff = std::min(collapsed_log_likelihood(s, a, sim.data),
                                 collapsed_log_likelihood(s, b, sim.data)) -
                        1.0 - 5.0 * rng.uniform();
  auto st = detail::ClusterStats::from(x.z, sim.data.Y, s.K);
  st.remove(x.z[i], sim.data.Y.row(i));
  std::vector<double> marg(s.K), log_pi(s.K);
  for (int k = 0; k < s.K; ++k) {
    marg[k] = marginal_of(s, st, k);
    log_pi[k] = std::log(detail::mix_probs(s)[k]);
  }
  const auto L = clustering_site_logliks(s, st, marg, sim.data.Y.row(i));
  const auto c = restricted_prior(log_pi, L, NsLevel{cutoff, false}, static_cast<std::size_t>(x.z[i]));
  return {c.log_density(k1) - c.log_density(k2), log_prior(s, a) - log_prior(s, b)};
}

ConditionalTriple lowrank_u_entry(const ModelSpec& spec, RngStream& rng,
                                  const TransitionOptions& opt, bool same) {
  auto [s, sim] = random_instance<LowRankSpec>(spec, rng);
  const double beta = rng.uniform();
  const auto& x = std::get<LowRankState>(sim.state);
  const auto g = cond::lowrank_u(s, x.V, sim.data.Y, beta, opt.mutant_noise_scale);
  LatentState a = x, b = x;
  auto& Ub = std::get<LowRankState>(b).U;
  if (!same) Ub = jitter(Ub, 0.3, rng);
  return {g.log_density(x.U.transpose()) - g.log_density(Ub.transpose()),
          tempered_log_f(s, a, sim.data, beta) - tempered_log_f(s, b, sim.data, beta)};
}

ConditionalTriple lowrank_v_entry(const ModelSpec& spec, RngStream& rng,
                                  const TransitionOptions&, bool same) {
  auto [s, sim] = random_instance<LowRankSpec>(spec, rng);
  const double beta = rng.uniform();
  const auto& x = std::get<LowRankState>(sim.state);
  const auto g = cond::lowrank_v(s, x.U, sim.data.Y, beta);
  LatentState a = x, b = x;
  auto& Vb = std::get<LowRankState>(b).V;
  if (!same) Vb = jitter(Vb, 0.3, rng);
  return {g.log_density(x.V) - g.log_density(Vb),
          tempered_log_f(s, a, sim.data, beta) - tempered_log_f(s, b, sim.data, beta)};
}

// Constrained scalar move on one entry of U (row_factor) or V.
ConditionalTriple lowrank_constrained(const ModelSpec& spec, RngStream& rng, bool row_factor,
                                      bool same) {
  auto [s, sim] = random_instance<LowRankSpec>(spec, rng);
  auto& x = std::get<LowRankState>(sim.state);
  const Eigen::MatrixXd R = sim.data.Y - x.U * x.V;
  const double L = log_likelihood(s, sim.state, sim.data);
  const double cutoff = L - 1.0 - 5.0 * rng.uniform();
  const double slack = (L - cutoff) * 2.0 * s.noise_var;
  Eigen::VectorXd c, v;
  double current, prior_var;
  int a_idx = static_cast<int>(rng.uniform_index(row_factor ? s.N : s.K));
  int b_idx = static_cast<int>(rng.uniform_index(row_factor ? s.K : s.D));
  double* entry;
  if (row_factor) {
    v = x.V.row(b_idx).transpose();
    c = R.row(a_idx).transpose() + x.U(a_idx, b_idx) * v;
    current = x.U(a_idx, b_idx);
    prior_var = s.u_var;
    entry = &x.U(a_idx, b_idx);
  } else {
    v = x.U.col(a_idx);
    c = R.col(b_idx) + x.V(a_idx, b_idx) * v;
    current = x.V(a_idx, b_idx);
    prior_var = s.v_var;
    entry = &x.V(a_idx, b_idx);
  }
  const double old_sq = (c - current * v).squaredNorm();
  const auto tg = feasible_interval(c, v, old_sq + slack, current, prior_var);
  const double other = same ? current : tg.sample(rng);
  LatentState a = sim.state;
  *entry = other;
  LatentState b = sim.state;
  return {tg.log_density(current) - tg.log_density(other), log_prior(s, a) - log_prior(s, b)};
}

ConditionalTriple binary_site_entry(const ModelSpec& spec, RngStream& rng,
                                    const TransitionOptions&, bool same) {
  auto [s, sim] = random_instance<BinarySpec>(spec, rng);
  const double beta = rng.uniform();
  const int i = static_cast<int>(rng.uniform_index(s.N));
  const int k = static_cast<int>(rng.uniform_index(s.K));
  auto& x = std::get<BinaryState>(sim.state);
  const Eigen::RowVectorXd r = sim.data.Y.row(i) - x.Z.row(i) * x.A + x.Z(i, k) * x.A.row(k);
  const auto bern = cond::binary_site(s, k, x.A.row(k), r, beta);
  const int v1 = static_cast<int>(rng.uniform_index(2));
  const int v2 = same ? v1 : 1 - v1;
  LatentState a = x, b = x;
  std::get<BinaryState>(a).Z(i, k) = v1;
  std::get<BinaryState>(b).Z(i, k) = v2;
  return {bern.log_density(v1) - bern.log_density(v2),
          tempered_log_f(s, a, sim.data, beta) - tempered_log_f(s, b, sim.data, beta)};
}

ConditionalTriple binary_a_entry(const ModelSpec& spec, RngStream& rng,
                                 const TransitionOptions& opt, bool same) {
  auto [s, sim] = random_instance<BinarySpec>(spec, rng);
  const double beta = rng.uniform();
  const auto& x = std::get<BinaryState>(sim.state);
  const auto g = cond::binary_a(s, x.Z, sim.data.Y, beta, opt.mutant_noise_scale);
  LatentState a = x, b = x;
  auto& Ab = std::get<BinaryState>(b).A;
  if (!same) Ab = jitter(Ab, 0.3, rng);
  return {g.log_density(x.A) - g.log_density(Ab),
          tempered_log_f(s, a, sim.data, beta) - tempered_log_f(s, b, sim.data, beta)};
}

ConditionalTriple binary_collapsed_entry(const ModelSpec& spec, RngStream& rng,
                                         const TransitionOptions&, bool same) {
  auto [s, sim] = random_instance<BinarySpec>(spec, rng);
  const int i = static_cast<int>(rng.uniform_index(s.N));
  const int k = static_cast<int>(rng.uniform_index(s.K));
  auto& x = std::get<BinaryState>(sim.state);
  const double beta = 1.0 - rng.uniform();
  BinarySpec sb = s;
  sb.noise_var = s.noise_var / beta;
  const Eigen::RowVectorXd y = sim.data.Y.row(i), z = x.Z.row(i);
  const Eigen::MatrixXd ztz = x.Z.transpose() * x.Z - z.transpose() * z;
  const Eigen::MatrixXd zty = x.Z.transpose() * sim.data.Y - z.transpose() * y;
  const cond::BinaryCollapsedRow row(s, ztz, zty, y, beta);
  const auto bern = row.site(z, k);
  const int v1 = static_cast<int>(rng.uniform_index(2));
  const int v2 = same ? v1 : 1 - v1;
  LatentState a = x, b = x;
  std::get<BinaryState>(a).Z(i, k) = v1;
  std::get<BinaryState>(b).Z(i, k) = v2;
  return {bern.log_density(v1) - bern.log_density(v2),
          collapsed_log_joint(sb, a, sim.data) - collapsed_log_joint(sb, b, sim.data)};
}

ConditionalTriple binary_constrained(const ModelSpec& spec, RngStream& rng,
                                     const TransitionOptions&, bool same) {
  auto [s, sim] = random_instance<BinarySpec>(spec, rng);
  const int i = static_cast<int>(rng.uniform_index(s.N));
  const int k = static_cast<int>(rng.uniform_index(s.K));
  auto& x = std::get<BinaryState>(sim.state);
  const int current = static_cast<int>(x.Z(i, k));
  std::vector<double> L(2);
  for (int v = 0; v < 2; ++v) {
    x.Z(i, k) = v;
    L[v] = factor_gaussian_log_marginal(sim.data.Y, x.Z, s.a_var, s.noise_var);
  }
  x.Z(i, k) = current;
  const double cutoff = std::min(L[0], L[1]) - 1.0 - 5.0 * rng.uniform();
  const double p = detail::attr_probs(s)[k];
  const auto c = restricted_prior({std::log1p(-p), std::log(p)}, L, NsLevel{cutoff, false},
                                  static_cast<std::size_t>(current));
  const int v1 = static_cast<int>(rng.uniform_index(2));
  const int v2 = same ? v1 : 1 - v1;
  LatentState a = x, b = x;
  std::get<BinaryState>(a).Z(i, k) = v1;
  std::get<BinaryState>(b).Z(i, k) = v2;
  return {c.log_density(v1) - c.log_density(v2), log_prior(s, a) - log_prior(s, b)};
}

}  // namespace

const std::vector<ConditionalEntry>& conditional_registry() {
  static const std::vector<ConditionalEntry> registry = {
      {kClusterAssign, ModelKind::Clustering, cluster_assign},
      {kClusterCenter, ModelKind::Clustering, cluster_center},
      {kClusterCollapsed, ModelKind::Clustering, cluster_collapsed},
      {kClusterConstrained, ModelKind::Clustering, cluster_constrained},
      {kLowRankU, ModelKind::LowRank, lowrank_u_entry},
      {kLowRankV, ModelKind::LowRank, lowrank_v_entry},
      {kLowRankConstrainedU, ModelKind::LowRank,
       [](const ModelSpec& s, RngStream& r, const TransitionOptions&, bool same) {
         return lowrank_constrained(s, r, true, same);
       }},
      {kLowRankConstrainedV, ModelKind::LowRank,
       [](const ModelSpec& s, RngStream& r, const TransitionOptions&, bool same) {
         return lowrank_constrained(s, r, false, same);
       }},
      {kBinarySite, ModelKind::Binary, binary_site_entry},
      {kBinaryA, ModelKind::Binary, binary_a_entry},
      {kBinaryCollapsed, ModelKind::Binary, binary_collapsed_entry},
      {kBinaryConstrained, ModelKind::Binary, binary_constrained},
  };
  return registry;
}

std::vector<std::string> sweep_conditionals(ModelKind k) {
  switch (k) {
    case ModelKind::Clustering:
      return {kClusterAssign, kClusterCenter, kClusterCollapsed, kClusterConstrained};
    case ModelKind::LowRank:
      return {kLowRankU, kLowRankV, kLowRankConstrainedU, kLowRankConstrainedV};
    case ModelKind::Binary:
      return {kBinarySite, kBinaryA, kBinaryCollapsed, kBinaryConstrained};
  }
  return {};
}

}  // namespace mlbench
