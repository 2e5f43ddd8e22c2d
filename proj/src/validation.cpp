#include "mlbench/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "model_detail.hpp"

namespace mlbench {

namespace {

template <class... Fs> struct Overload : Fs... { using Fs::operator()...; };
template <class... Fs> Overload(Fs...) -> Overload<Fs...>;

}  // namespace

double consistency_error(const ConditionalTriple& t) {
  return std::abs(t.conditional_ratio - t.joint_ratio) / std::max(1.0, std::abs(t.joint_ratio));
}

void check_registry_complete(ModelKind kind) {
  const auto& reg = conditional_registry();
  for (const auto& name : sweep_conditionals(kind)) {
    const bool found = std::any_of(reg.begin(), reg.end(), [&](const ConditionalEntry& e) {
      return e.name == name && e.model == kind;
    });
    if (!found) throw std::logic_error("unregistered conditional: " + name);
  }
}

ConsistencyReport conditional_consistency_suite(const ModelSpec& spec, int n_triples,
                                                const RngStream& rng,
                                                const TransitionOptions& options) {
  if (n_triples < 1) throw std::invalid_argument("n_triples must be >= 1");
  const ModelKind k = kind(spec);
  check_registry_complete(k);
  ConsistencyReport report{k, {}, true};
  const auto& reg = conditional_registry();
  for (std::size_t e = 0; e < reg.size(); ++e) {
    if (reg[e].model != k) continue;
    ConsistencyEntry entry{reg[e].name, n_triples, 0.0, true};
    const RngStream base = rng.substream(e);
    for (int j = 0; j < n_triples; ++j) {
      RngStream r = base.substream(j);
      const auto t = reg[e].draw(spec, r, options, j == 0);
      const double err = consistency_error(t);
      entry.worst = std::isnan(err) ? std::numeric_limits<double>::infinity()
                                    : std::max(entry.worst, err);
    }
    entry.pass = entry.worst <= kConsistencyTolerance;
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

double kolmogorov_q(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Complementary (theta-function) form converges fast for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double s = 0.0;
    for (int j = 1; j <= 50; ++j) {
      const double m = 2.0 * j - 1.0;
      s += std::exp(-m * m * pi2 / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    s += (j % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("empty aggregation");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

// ---------------------------------------------------------------------------
// Geweke

std::vector<std::string> geweke_statistic_names() {
  return {"data mean", "data variance", "occupancy", "parameter norm"};
}

std::vector<double> geweke_statistics(const ModelSpec& spec, const LatentState& state,
                                      const Dataset& data) {
  const double n = static_cast<double>(data.Y.size());
  const double mean = data.Y.mean();
  const double var = (data.Y.array() - mean).square().sum() / n;
  double occupancy = 0.0, norm = 0.0;
  std::visit(Overload{
      [&](const ClusteringSpec& s) {
        const auto& x = state_as(s, state);
        occupancy = static_cast<double>(std::count(x.z.begin(), x.z.end(), 0)) / s.N;
        norm = x.theta.squaredNorm();
      },
      [&](const LowRankSpec& s) {
        const auto& x = state_as(s, state);
        occupancy = x.U.squaredNorm() / (s.N * s.K);
        norm = x.V.squaredNorm();
      },
      [&](const BinarySpec& s) {
        const auto& x = state_as(s, state);
        occupancy = x.Z.mean();
        norm = x.A.squaredNorm();
      }}, spec);
  return {mean, var, occupancy, norm};
}

GewekeReport geweke_test(const ModelSpec& spec, const GewekeConfig& config, const RngStream& rng) {
  if (config.n_samples < 2) throw std::invalid_argument("n_samples must be >= 2");
  if (config.chain_length < 0 || config.sweeps_per_iteration < 0) {
    throw std::invalid_argument("chain settings must be non-negative");
  }
  const ModelSpec s = validated(spec);
  const auto names = geweke_statistic_names();
  GewekeReport report;
  report.alpha = config.alpha;
  for (const auto& n : names) report.statistics.push_back({n, {}, {}, {}});
  const RngStream fwd = rng.substream(0), chn = rng.substream(1);
  for (int j = 0; j < config.n_samples; ++j) {
    RngStream r = fwd.substream(j);
    const auto sim = simulate(s, r);
    const auto st = geweke_statistics(s, sim.state, sim.data);
    for (std::size_t q = 0; q < st.size(); ++q) report.statistics[q].forward.push_back(st[q]);
  }
  for (int j = 0; j < config.n_samples; ++j) {
    RngStream r = chn.substream(j);
    auto sim = simulate(s, r);
    for (int it = 0; it < config.chain_length; ++it) {
      for (int k = 0; k < config.sweeps_per_iteration; ++k) {
        sim.state = gibbs_sweep(s, sim.state, sim.data, 1.0, r, SweepDirection::Forward,
                                config.options);
      }
      sim.data = sample_data(s, sim.state, r);
    }
    const auto st = geweke_statistics(s, sim.state, sim.data);
    for (std::size_t q = 0; q < st.size(); ++q) report.statistics[q].chain.push_back(st[q]);
  }
  const double threshold = config.alpha / static_cast<double>(names.size());
  for (auto& g : report.statistics) {
    g.ks = ks_two_sample(g.forward, g.chain);
    report.pass = report.pass && g.ks.p_value > threshold;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Bound audit

BoundAudit bound_violation_audit(std::span<const LogEstimate> estimates, double truth,
                                 std::span<const double> b_values) {
  if (estimates.empty()) throw std::invalid_argument("empty aggregation");
  BoundAudit audit;
  audit.estimator_id = estimates.front().estimator_id;
  audit.direction = estimates.front().direction;
  for (const auto& e : estimates) {
    if (e.estimator_id != audit.estimator_id || e.direction != audit.direction) {
      throw std::invalid_argument("estimates mix estimators or directions");
    }
  }
  if (audit.direction == Direction::None) throw std::invalid_argument("no bound to audit");
  const double n = static_cast<double>(estimates.size());
  for (double b : b_values) {
    double hits = 0.0;
    for (const auto& e : estimates) {
      const bool v = audit.direction == Direction::Lower ? e.value > truth + b : e.value < truth - b;
      hits += v ? 1.0 : 0.0;
    }
    BoundAuditRow row{b, hits / n, std::exp(-b), false};
    row.violated = row.rate > row.cap + kAuditSlack;
    audit.pass = audit.pass && !row.violated;
    audit.rows.push_back(row);
  }
  return audit;
}

// ---------------------------------------------------------------------------
// Agreement

AgreementReport cross_estimator_agreement(const ModelSpec& spec, const Dataset& data,
                                          const ExactSample& exact,
                                          std::span<const EstimatorKind> estimators,
                                          const AgreementBudget& budget, const RngStream& rng,
                                          std::optional<double> truth) {
  AgreementReport report;
  report.truth = truth;
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    const auto& info = estimator_info(estimators[e]);
    long b = 1;
    int trials = 1;
    switch (info.kind) {
      case EstimatorKind::AIS:
      case EstimatorKind::ReverseAIS: b = budget.ais_T; trials = budget.ais_chains; break;
      case EstimatorKind::SMC:
      case EstimatorKind::SHME: b = budget.smc_sweeps; trials = budget.smc_trials; break;
      case EstimatorKind::NS: b = budget.ns_steps; trials = budget.ns_trials; break;
      case EstimatorKind::CMS: b = budget.cms_transitions; break;
      case EstimatorKind::LW: b = 100000; break;
      case EstimatorKind::HME: b = 10000; break;
      case EstimatorKind::BIC: b = 500; break;
      case EstimatorKind::VB: b = 10; break;
    }
    std::vector<double> v;
    for (int t = 0; t < trials; ++t) {
      v.push_back(run_estimator(info.kind, b, spec, data, &exact, rng.substream(e).substream(t)).value);
    }
    report.estimators.push_back(info.name);
    report.values.push_back(combine_trials(info.combine, v));
  }
  for (std::size_t a = 0; a < report.values.size(); ++a) {
    for (std::size_t c = a + 1; c < report.values.size(); ++c) {
      report.max_discrepancy =
          std::max(report.max_discrepancy, std::abs(report.values[a] - report.values[c]));
    }
    if (truth) {
      report.max_discrepancy = std::max(report.max_discrepancy, std::abs(report.values[a] - *truth));
    }
  }
  report.pass = report.max_discrepancy <= kAgreementTolerance;
  return report;
}

}  // namespace mlbench
