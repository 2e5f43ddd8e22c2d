#include "mlbench/basic_estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "model_detail.hpp"

namespace mlbench {

namespace {

template <class... Fs> struct Overload : Fs... { using Fs::operator()...; };
template <class... Fs> Overload(Fs...) -> Overload<Fs...>;

LogEstimate make_estimate(double value, const char* id, Direction dir, const RngStream& rng,
                          int n_chains, std::string config) {
  LogEstimate e;
  e.value = value;
  e.estimator_id = id;
  e.direction = dir;
  e.trial_seed = rng.seed();
  e.n_chains = n_chains;
  e.config = std::move(config);
  return e;
}

}  // namespace

LogEstimate likelihood_weighting(const ModelSpec& spec, const Dataset& data, int n_samples,
                                 const RngStream& rng) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  check_data(spec, data);
  std::vector<double> ll(n_samples);
  for (int k = 0; k < n_samples; ++k) {
    RngStream r = rng.substream(k);
    ll[k] = log_likelihood(spec, sample_prior(spec, r), data);
  }
  return make_estimate(log_mean_exp(ll), "lw", Direction::Lower, rng, n_samples,
                       "samples=" + std::to_string(n_samples));
}

LogEstimate harmonic_mean(const ModelSpec& spec, const Dataset& data, const ExactSample& exact,
                          int n_samples, int sweeps_between, RngStream& rng) {
  require_exact(exact);
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (sweeps_between < 0) throw std::invalid_argument("sweeps_between must be >= 0");
  check_data(spec, data);
  LatentState x = exact.state;
  std::vector<double> ll(n_samples);
  for (int k = 0; k < n_samples; ++k) {
    for (int s = 0; s < sweeps_between; ++s) x = gibbs_sweep(spec, x, data, 1.0, rng);
    ll[k] = log_likelihood(spec, x, data);
    if (ll[k] == kNegInf) throw std::domain_error("zero-likelihood sample");
  }
  return make_estimate(log_harmonic_mean_exp(ll), "hme", Direction::Upper, rng, n_samples,
                       "samples=" + std::to_string(n_samples));
}

MapResult map_search(const ModelSpec& spec, const Dataset& data, int n_sweeps, RngStream& rng) {
  check_data(spec, data);
  LatentState x = sample_prior(spec, rng);
  MapResult best{x, log_joint(spec, x, data)};
  auto consider = [&](const LatentState& s) {
    const double lj = log_joint(spec, s, data);
    if (lj > best.log_joint) best = {s, lj};
  };
  if (n_sweeps >= 2) {
    const auto sched = make_sigmoid_schedule(n_sweeps);
    for (double b : sched.betas) {
      x = gibbs_sweep(spec, x, data, b, rng);
      consider(x);
    }
  } else if (n_sweeps == 1) {
    x = gibbs_sweep(spec, x, data, 1.0, rng);
    consider(x);
  }
  x = best.state;
  for (int it = 0; it < 1000; ++it) {
    const double before = best.log_joint;
    x = mode_sweep(spec, x, data);
    consider(x);
    if (!(best.log_joint > before)) break;
  }
  return best;
}

int bic_parameter_count(const ModelSpec& spec) {
  return std::visit(Overload{
      [](const ClusteringSpec& s) { return s.K * s.D; },
      [](const LowRankSpec& s) { return s.K * (s.N + s.D); },
      [](const BinarySpec& s) { return s.K * s.D; }}, spec);
}

double bic_value(const ModelSpec& spec, double log_lik, int n_rows) {
  if (n_rows == 0) return log_lik;
  return log_lik - 0.5 * bic_parameter_count(spec) * std::log(static_cast<double>(n_rows));
}

LogEstimate bic(const ModelSpec& spec, const Dataset& data, int n_map_sweeps, RngStream& rng) {
  const auto map = map_search(spec, data, n_map_sweeps, rng);
  const double v = bic_value(spec, log_likelihood(spec, map.state, data), data.N());
  return make_estimate(v, "bic", Direction::None, rng, 1,
                       "map_sweeps=" + std::to_string(n_map_sweeps));
}

LogEstimate cms_at(const ModelSpec& spec, const Dataset& data, const LatentState& star,
                   int n_transitions, RngStream& rng) {
  if (n_transitions < 0) throw std::invalid_argument("n_transitions must be >= 0");
  check_state(spec, star);
  LatentState x = reverse_sweep(spec, star, data, rng);
  std::vector<double> lt;
  lt.reserve(n_transitions + 1);
  lt.push_back(sweep_transition_logprob(spec, x, star, data));
  for (int k = 0; k < n_transitions; ++k) {
    x = gibbs_sweep(spec, x, data, 1.0, rng);
    lt.push_back(sweep_transition_logprob(spec, x, star, data));
  }
  if (std::all_of(lt.begin(), lt.end(), [](double v) { return v == kNegInf; })) {
    throw std::domain_error("star point unreachable");
  }
  const double v = log_joint(spec, star, data) - log_mean_exp(lt);
  return make_estimate(v, "cms", Direction::Lower, rng, 1,
                       "transitions=" + std::to_string(n_transitions));
}

LogEstimate cms(const ModelSpec& spec, const Dataset& data, int n_transitions, RngStream& rng,
                int n_map_sweeps) {
  const auto map = map_search(spec, data, n_map_sweeps, rng);
  return cms_at(spec, data, map.state, n_transitions, rng);
}

// ---------------------------------------------------------------------------
// Nested sampling

double ns_volume(int n_particles, long t) {
  return std::pow(static_cast<double>(n_particles) / (n_particles + 1), static_cast<double>(t));
}

NestedSamplingResult nested_sampling(const ModelSpec& spec, const Dataset& data,
                                     const NestedSamplingConfig& config, RngStream& rng) {
  if (config.n_particles < 2) throw std::invalid_argument("nested sampling needs >= 2 particles");
  if (config.mcmc_steps < 0) throw std::invalid_argument("mcmc_steps must be >= 0");
  if (!(config.stop_ratio > 1.0)) throw std::invalid_argument("stop_ratio must exceed 1");
  check_data(spec, data);
  const int K = config.n_particles;
  const double log_shrink = std::log(static_cast<double>(K) / (K + 1));
  const double log_shell0 = -std::log(static_cast<double>(K + 1));  // log(V_0 - V_1)
  const double log_stop = std::log1p(config.stop_ratio - 1.0);

  // Each particle carries an Exp(1) tie-break so that particles on one
  // likelihood plateau are ordered; order is by likelihood, then tie-break.
  // A draw above a plateau's tie-break is the tie-break plus a fresh Exp(1).
  std::vector<LatentState> live;
  std::vector<double> L(K), u(K);
  for (int k = 0; k < K; ++k) {
    live.push_back(ns_project(spec, sample_prior(spec, rng)));
    L[k] = ns_log_likelihood(spec, live[k], data);
    u[k] = -std::log(rng.uniform_open());
  }
  auto below = [&](int a, int b) {
    return ns_on_plateau(L[a], L[b]) ? u[a] < u[b] : L[a] < L[b];
  };

  NestedSamplingTrace trace;
  trace.n_particles = K;
  trace.stop_ratio = config.stop_ratio;
  double log_z = kNegInf;
  long t = 0;
  for (;; ++t) {
    if (t >= config.max_steps) throw std::runtime_error("stop criterion never met");
    int dead = 0;
    for (int k = 1; k < K; ++k)
      if (below(k, dead)) dead = k;
    const double cutoff = L[dead], tie = u[dead];

    trace.cutoffs.push_back(cutoff);
    trace.volumes.push_back(ns_volume(K, t));
    const double shell = t * log_shrink + log_shell0 + cutoff;
    const double next_z = log_add_exp(log_z, shell);
    const bool done = log_z != kNegInf && next_z - log_z < log_stop;
    log_z = next_z;

    int src = static_cast<int>(rng.uniform_index(K - 1));
    if (src >= dead) ++src;
    LatentState x = live[src];
    double ux = u[src];
    for (int s = 0; s < config.mcmc_steps; ++s) {
      x = constrained_prior_step(spec, x, data, NsLevel{cutoff, ux > tie}, rng);
      const double lx = ns_log_likelihood(spec, x, data);
      ux = (ns_on_plateau(lx, cutoff) ? tie : 0.0) - std::log(rng.uniform_open());
    }
    live[dead] = std::move(x);
    L[dead] = ns_log_likelihood(spec, live[dead], data);
    u[dead] = ux;
    if (done) {
      ++t;
      break;
    }
  }

  trace.log_remainder = t * log_shrink + log_mean_exp(L);
  const double estimate = log_add_exp(log_z, trace.log_remainder);

  // Each shell weighted by the likelihood at its outer edge; the last shell
  // uses the smallest live likelihood.
  double upper = kNegInf;
  const long S = static_cast<long>(trace.cutoffs.size());
  for (long s = 0; s < S; ++s) {
    const double outer = s + 1 < S ? trace.cutoffs[s + 1] : *std::min_element(L.begin(), L.end());
    upper = log_add_exp(upper, s * log_shrink + log_shell0 + outer);
  }
  trace.log_upper = log_add_exp(upper, trace.log_remainder);

  NestedSamplingResult out;
  out.estimate = make_estimate(estimate, "ns", Direction::None, rng, K,
                               "steps=" + std::to_string(config.mcmc_steps));
  out.trace = std::move(trace);
  return out;
}

// ---------------------------------------------------------------------------
// Variational Bayes

namespace {

double xlogy(double x, double log_y) { return x == 0.0 ? 0.0 : x * log_y; }

double log_sigmoid(double l) {
  if (l == std::numeric_limits<double>::infinity()) return 0.0;
  if (l == kNegInf) return kNegInf;
  return l >= 0 ? -std::log1p(std::exp(-l)) : l - std::log1p(std::exp(l));
}

double gaussian_block_entropy(double var, int dim) {
  return 0.5 * dim * (kLog2Pi + 1.0 + std::log(var));
}

// ----- clustering

double bound_of(const ClusteringSpec& s, const Dataset& d, const ClusteringVB& q) {
  const auto& pi = detail::mix_probs(s);
  const double sn = s.noise_var, st = s.between_var;
  double b = 0.0;
  for (int k = 0; k < s.K; ++k) {
    if (!(q.var[k] > 0.0)) return kNegInf;
    b += -0.5 * s.D * (kLog2Pi + std::log(st)) -
         (q.mean.row(k).squaredNorm() + s.D * q.var[k]) / (2.0 * st);
    b += gaussian_block_entropy(q.var[k], s.D);
  }
  for (int i = 0; i < s.N; ++i) {
    for (int k = 0; k < s.K; ++k) {
      const double lr = q.log_r(i, k);
      if (lr == kNegInf) continue;
      const double r = std::exp(lr);
      const double fit = -0.5 * s.D * (kLog2Pi + std::log(sn)) -
                         ((d.Y.row(i) - q.mean.row(k)).squaredNorm() + s.D * q.var[k]) / (2.0 * sn);
      b += r * (std::log(pi[k]) + fit - lr);
    }
  }
  return b;
}

void update_assignments(const ClusteringSpec& s, const Dataset& d, ClusteringVB& q) {
  const auto& pi = detail::mix_probs(s);
  for (int i = 0; i < s.N; ++i) {
    std::vector<double> w(s.K);
    for (int k = 0; k < s.K; ++k) {
      w[k] = std::log(pi[k]) -
             ((d.Y.row(i) - q.mean.row(k)).squaredNorm() + s.D * q.var[k]) / (2.0 * s.noise_var);
    }
    const double z = log_sum_exp(w);
    for (int k = 0; k < s.K; ++k) q.log_r(i, k) = w[k] - z;
  }
}

void update_centers(const ClusteringSpec& s, const Dataset& d, ClusteringVB& q) {
  const Eigen::MatrixXd R = q.log_r.array().exp().matrix();
  for (int k = 0; k < s.K; ++k) {
    const double nk = R.col(k).sum();
    const double prec = 1.0 / s.between_var + nk / s.noise_var;
    q.var[k] = 1.0 / prec;
    q.mean.row(k) = (R.col(k).transpose() * d.Y) / (s.noise_var * prec);
  }
}

ClusteringVB init_of(const ClusteringSpec& s, RngStream& rng) {
  const auto& pi = detail::mix_probs(s);
  ClusteringVB q{Eigen::MatrixXd(s.N, s.K), Eigen::MatrixXd(s.K, s.D),
                 Eigen::VectorXd::Constant(s.K, s.between_var)};
  for (int k = 0; k < s.K; ++k)
    for (int j = 0; j < s.D; ++j) q.mean(k, j) = std::sqrt(s.between_var) * rng.normal();
  for (int i = 0; i < s.N; ++i) {
    std::vector<double> w(s.K);
    for (int k = 0; k < s.K; ++k)
      w[k] = pi[k] > 0.0 ? std::log(-std::log(rng.uniform_open())) : kNegInf;
    const double z = log_sum_exp(w);
    for (int k = 0; k < s.K; ++k) q.log_r(i, k) = w[k] - z;
  }
  return q;
}

// ----- low-rank

double bound_of(const LowRankSpec& s, const Dataset& d, const LowRankVB& q) {
  const Eigen::LLT<Eigen::MatrixXd> cu(q.u_cov), cv(q.v_cov);
  if (cu.info() != Eigen::Success || cv.info() != Eigen::Success) return kNegInf;
  auto logdet = [](const Eigen::LLT<Eigen::MatrixXd>& c) {
    return 2.0 * c.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };
  for (int a = 0; a < s.K; ++a)
    if (!(cu.matrixL().toDenseMatrix()(a, a) > 0.0) || !(cv.matrixL().toDenseMatrix()(a, a) > 0.0))
      return kNegInf;
  const double K = s.K;
  double b = 0.0;
  b += -0.5 * s.N * K * (kLog2Pi + std::log(s.u_var)) -
       (q.u_mean.squaredNorm() + s.N * q.u_cov.trace()) / (2.0 * s.u_var);
  b += -0.5 * s.D * K * (kLog2Pi + std::log(s.v_var)) -
       (q.v_mean.squaredNorm() + s.D * q.v_cov.trace()) / (2.0 * s.v_var);
  const Eigen::MatrixXd EUU = q.u_mean.transpose() * q.u_mean + s.N * q.u_cov;
  const Eigen::MatrixXd EVV = q.v_mean * q.v_mean.transpose() + s.D * q.v_cov;
  const double sq = d.Y.squaredNorm() - 2.0 * (d.Y.cwiseProduct(q.u_mean * q.v_mean)).sum() +
                    (EUU * EVV).trace();
  b += -0.5 * s.N * s.D * (kLog2Pi + std::log(s.noise_var)) - sq / (2.0 * s.noise_var);
  b += 0.5 * s.N * (K * (kLog2Pi + 1.0) + logdet(cu));
  b += 0.5 * s.D * (K * (kLog2Pi + 1.0) + logdet(cv));
  return b;
}

void update_u(const LowRankSpec& s, const Dataset& d, LowRankVB& q) {
  const Eigen::MatrixXd EVV = q.v_mean * q.v_mean.transpose() + s.D * q.v_cov;
  const Eigen::MatrixXd prec =
      Eigen::MatrixXd::Identity(s.K, s.K) / s.u_var + EVV / s.noise_var;
  q.u_cov = prec.inverse();
  q.u_cov = 0.5 * (q.u_cov + q.u_cov.transpose()).eval();
  q.u_mean = d.Y * q.v_mean.transpose() * q.u_cov / s.noise_var;
}

void update_v(const LowRankSpec& s, const Dataset& d, LowRankVB& q) {
  const Eigen::MatrixXd EUU = q.u_mean.transpose() * q.u_mean + s.N * q.u_cov;
  const Eigen::MatrixXd prec =
      Eigen::MatrixXd::Identity(s.K, s.K) / s.v_var + EUU / s.noise_var;
  q.v_cov = prec.inverse();
  q.v_cov = 0.5 * (q.v_cov + q.v_cov.transpose()).eval();
  q.v_mean = q.v_cov * q.u_mean.transpose() * d.Y / s.noise_var;
}

LowRankVB init_of(const LowRankSpec& s, RngStream& rng) {
  LowRankVB q{Eigen::MatrixXd(s.N, s.K), s.u_var * Eigen::MatrixXd::Identity(s.K, s.K),
              Eigen::MatrixXd(s.K, s.D), s.v_var * Eigen::MatrixXd::Identity(s.K, s.K)};
  for (int i = 0; i < s.N; ++i)
    for (int k = 0; k < s.K; ++k) q.u_mean(i, k) = std::sqrt(s.u_var) * rng.normal();
  for (int k = 0; k < s.K; ++k)
    for (int j = 0; j < s.D; ++j) q.v_mean(k, j) = std::sqrt(s.v_var) * rng.normal();
  return q;
}

// ----- binary

double bound_of(const BinarySpec& s, const Dataset& d, const BinaryVB& q) {
  const auto& p = detail::attr_probs(s);
  const double sn = s.noise_var;
  double b = 0.0;
  for (int k = 0; k < s.K; ++k) {
    if (!(q.var[k] > 0.0)) return kNegInf;
    b += -0.5 * s.D * (kLog2Pi + std::log(s.a_var)) -
         (q.mean.row(k).squaredNorm() + s.D * q.var[k]) / (2.0 * s.a_var);
    b += gaussian_block_entropy(q.var[k], s.D);
  }
  Eigen::MatrixXd rho(s.N, s.K);
  for (int i = 0; i < s.N; ++i) {
    for (int k = 0; k < s.K; ++k) {
      const double l1 = log_sigmoid(q.logit(i, k)), l0 = log_sigmoid(-q.logit(i, k));
      const double r = std::exp(l1);
      rho(i, k) = r;
      b += xlogy(r, std::log(p[k]) - l1) + xlogy(1.0 - r, std::log1p(-p[k]) - l0);
    }
  }
  const Eigen::MatrixXd G = q.mean * q.mean.transpose();
  double sq = d.Y.squaredNorm() - 2.0 * (d.Y.cwiseProduct(rho * q.mean)).sum();
  for (int i = 0; i < s.N; ++i) {
    for (int k = 0; k < s.K; ++k) {
      sq += rho(i, k) * (G(k, k) + s.D * q.var[k]);
      for (int l = 0; l < s.K; ++l)
        if (l != k) sq += rho(i, k) * rho(i, l) * G(k, l);
    }
  }
  b += -0.5 * s.N * s.D * (kLog2Pi + std::log(sn)) - sq / (2.0 * sn);
  return b;
}

Eigen::MatrixXd rho_of(const BinaryVB& q) {
  return q.logit.unaryExpr([](double l) { return std::exp(log_sigmoid(l)); });
}

void update_sites(const BinarySpec& s, const Dataset& d, BinaryVB& q) {
  const auto& p = detail::attr_probs(s);
  Eigen::MatrixXd rho = rho_of(q);
  for (int i = 0; i < s.N; ++i) {
    for (int k = 0; k < s.K; ++k) {
      if (p[k] == 0.0 || p[k] == 1.0) continue;
      Eigen::RowVectorXd resid = d.Y.row(i) - rho.row(i) * q.mean;
      resid += rho(i, k) * q.mean.row(k);
      const double l = std::log(p[k]) - std::log1p(-p[k]) -
                       (q.mean.row(k).squaredNorm() + s.D * q.var[k] -
                        2.0 * q.mean.row(k).dot(resid)) / (2.0 * s.noise_var);
      q.logit(i, k) = l;
      rho(i, k) = std::exp(log_sigmoid(l));
    }
  }
}

void update_rows(const BinarySpec& s, const Dataset& d, BinaryVB& q) {
  const Eigen::MatrixXd rho = rho_of(q);
  for (int k = 0; k < s.K; ++k) {
    const double prec = 1.0 / s.a_var + rho.col(k).sum() / s.noise_var;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(s.D);
    for (int i = 0; i < s.N; ++i) {
      if (rho(i, k) == 0.0) continue;
      Eigen::RowVectorXd resid = d.Y.row(i) - rho.row(i) * q.mean;
      resid += rho(i, k) * q.mean.row(k);
      acc += rho(i, k) * resid;
    }
    q.var[k] = 1.0 / prec;
    q.mean.row(k) = acc / (s.noise_var * prec);
  }
}

BinaryVB init_of(const BinarySpec& s, RngStream& rng) {
  const auto& p = detail::attr_probs(s);
  const double inf = std::numeric_limits<double>::infinity();
  BinaryVB q{Eigen::MatrixXd(s.N, s.K), Eigen::MatrixXd(s.K, s.D),
             Eigen::VectorXd::Constant(s.K, s.a_var)};
  for (int k = 0; k < s.K; ++k)
    for (int j = 0; j < s.D; ++j) q.mean(k, j) = std::sqrt(s.a_var) * rng.normal();
  for (int i = 0; i < s.N; ++i) {
    for (int k = 0; k < s.K; ++k) {
      const double u = rng.uniform_open();
      q.logit(i, k) = p[k] == 0.0 ? -inf : p[k] == 1.0 ? inf : std::log(u) - std::log1p(-u);
    }
  }
  return q;
}

// ----- shared driver

void update_block(const ModelSpec& spec, const Dataset& d, VariationalPosterior& q, int block) {
  std::visit(Overload{
      [&](const ClusteringSpec& s) {
        auto& c = std::get<ClusteringVB>(q);
        block == 0 ? update_assignments(s, d, c) : update_centers(s, d, c);
      },
      [&](const LowRankSpec& s) {
        auto& l = std::get<LowRankVB>(q);
        block == 0 ? update_u(s, d, l) : update_v(s, d, l);
      },
      [&](const BinarySpec& s) {
        auto& b = std::get<BinaryVB>(q);
        block == 0 ? update_sites(s, d, b) : update_rows(s, d, b);
      }}, spec);
}

VariationalPosterior init_posterior(const ModelSpec& spec, RngStream& rng) {
  return std::visit([&](const auto& s) -> VariationalPosterior { return init_of(s, rng); }, spec);
}

// Applies f to every scalar parameter slot of q, passing a setter-style
// reference. Parameters that are fixed by a degenerate prior are skipped.
template <class F>
void for_each_parameter(VariationalPosterior& q, F&& f) {
  std::visit(Overload{
      [&](ClusteringVB& c) {
        for (Eigen::Index i = 0; i < c.log_r.rows(); ++i) {
          for (Eigen::Index k = 0; k < c.log_r.cols(); ++k) {
            if (c.log_r(i, k) == kNegInf) continue;
            f([&c, i, k](double step) {
              c.log_r(i, k) += step;
              std::vector<double> row(c.log_r.cols());
              for (Eigen::Index j = 0; j < c.log_r.cols(); ++j) row[j] = c.log_r(i, j);
              const double norm = log_sum_exp(row);
              for (Eigen::Index j = 0; j < c.log_r.cols(); ++j) c.log_r(i, j) -= norm;
            });
          }
        }
        for (Eigen::Index k = 0; k < c.mean.rows(); ++k)
          for (Eigen::Index j = 0; j < c.mean.cols(); ++j)
            f([&c, k, j](double step) { c.mean(k, j) += step; });
        for (Eigen::Index k = 0; k < c.var.size(); ++k)
          f([&c, k](double step) { c.var[k] += step; });
      },
      [&](LowRankVB& l) {
        for (auto* m : {&l.u_mean, &l.v_mean})
          for (Eigen::Index a = 0; a < m->rows(); ++a)
            for (Eigen::Index b = 0; b < m->cols(); ++b)
              f([m, a, b](double step) { (*m)(a, b) += step; });
        for (auto* m : {&l.u_cov, &l.v_cov})
          for (Eigen::Index a = 0; a < m->rows(); ++a)
            for (Eigen::Index b = 0; b <= a; ++b)
              f([m, a, b](double step) {
                (*m)(a, b) += step;
                if (a != b) (*m)(b, a) += step;
              });
      },
      [&](BinaryVB& b) {
        for (Eigen::Index i = 0; i < b.logit.rows(); ++i)
          for (Eigen::Index k = 0; k < b.logit.cols(); ++k)
            if (std::isfinite(b.logit(i, k)))
              f([&b, i, k](double step) { b.logit(i, k) += step; });
        for (Eigen::Index k = 0; k < b.mean.rows(); ++k)
          for (Eigen::Index j = 0; j < b.mean.cols(); ++j)
            f([&b, k, j](double step) { b.mean(k, j) += step; });
        for (Eigen::Index k = 0; k < b.var.size(); ++k)
          f([&b, k](double step) { b.var[k] += step; });
      }}, q);
}

}  // namespace

double vb_bound(const ModelSpec& spec, const Dataset& data, const VariationalPosterior& q) {
  check_data(spec, data);
  return std::visit(Overload{
      [&](const ClusteringSpec& s) { return bound_of(s, data, std::get<ClusteringVB>(q)); },
      [&](const LowRankSpec& s) { return bound_of(s, data, std::get<LowRankVB>(q)); },
      [&](const BinarySpec& s) { return bound_of(s, data, std::get<BinaryVB>(q)); }}, spec);
}

double vb_perturbation_gain(const ModelSpec& spec, const Dataset& data,
                            const VariationalPosterior& q, double step) {
  const double base = vb_bound(spec, data, q);
  double gain = kNegInf;
  VariationalPosterior work = q;
  // Enumerate parameter slots on a scratch copy; each probe perturbs a
  // fresh copy so the slots do not interact.
  std::size_t n_slots = 0;
  for_each_parameter(work, [&](auto&&) { ++n_slots; });
  for (std::size_t slot = 0; slot < n_slots; ++slot) {
    for (double sign : {1.0, -1.0}) {
      VariationalPosterior probe = q;
      std::size_t idx = 0;
      for_each_parameter(probe, [&](auto&& apply) {
        if (idx++ == slot) apply(sign * step);
      });
      gain = std::max(gain, vb_bound(spec, data, probe) - base);
    }
  }
  return gain;
}

VariationalPosterior vb_optimize(const ModelSpec& spec, const Dataset& data, const VbConfig& config,
                                 RngStream& rng, std::vector<double>* trace) {
  check_data(spec, data);
  VariationalPosterior q = init_posterior(spec, rng);
  double current = vb_bound(spec, data, q);
  std::vector<double> history;
  bool polishing = false;
  for (int it = 0; it < config.max_iterations; ++it) {
    const double start = current;
    for (int block = 0; block < 2; ++block) {
      update_block(spec, data, q, block);
      const double next = vb_bound(spec, data, q);
      if (it > 0 || block > 0) {
        if (next < current - config.monotonic_tolerance) {
          throw std::runtime_error("monotonicity violated");
        }
      }
      if (trace) trace->push_back(next);
      current = next;
    }
    history.push_back(current);
    if (!polishing) {
      const int w = config.window;
      if (static_cast<int>(history.size()) > w &&
          history.back() - history[history.size() - 1 - w] < config.min_improvement) {
        polishing = true;
      }
    } else if (!(current - start > 1e-12)) {
      break;
    }
  }
  return q;
}

VbResult variational_bayes(const ModelSpec& spec, const Dataset& data, const VbConfig& config,
                           const RngStream& rng) {
  if (config.n_restarts < 1) throw std::invalid_argument("n_restarts must be >= 1");
  VbResult out;
  double best = kNegInf;
  for (int r = 0; r < config.n_restarts; ++r) {
    RngStream sub = rng.substream(r);
    VariationalPosterior q = vb_optimize(spec, data, config, sub);
    const double b = vb_bound(spec, data, q);
    out.restart_bounds.push_back(b);
    if (r == 0 || b > best) {
      best = b;
      out.posterior = std::move(q);
    }
  }
  const std::string cfg = "restarts=" + std::to_string(config.n_restarts);
  out.bound = make_estimate(best, "vb", Direction::Lower, rng, config.n_restarts, cfg);
  out.corrected = out.bound;
  out.corrected.estimator_id = "vb_corrected";
  out.corrected.direction = Direction::None;
  out.corrected.value = best + log_factorial(components(spec));
  return out;
}

}  // namespace mlbench
