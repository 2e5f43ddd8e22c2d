#include "mlbench/catalogue.hpp"

#include <algorithm>
#include <stdexcept>

namespace mlbench {

const std::vector<EstimatorInfo>& estimator_catalogue() {
  using K = EstimatorKind;
  using C = CombineRule;
  static const std::vector<EstimatorInfo> table = {
      {K::AIS, "ais", "T", Direction::Lower, C::ArithmeticMean, false},
      {K::ReverseAIS, "reverse_ais", "T", Direction::Upper, C::HarmonicMean, true},
      {K::SMC, "smc", "sweeps_per_point", Direction::Lower, C::ArithmeticMean, false},
      {K::SHME, "shme", "sweeps_per_point", Direction::Upper, C::HarmonicMean, true},
      {K::LW, "lw", "samples", Direction::Lower, C::ArithmeticMean, false},
      {K::HME, "hme", "samples", Direction::Upper, C::HarmonicMean, true},
      {K::BIC, "bic", "map_sweeps", Direction::None, C::MeanOfLogs, false},
      {K::CMS, "cms", "transitions", Direction::Lower, C::ArithmeticMean, false},
      {K::NS, "ns", "mcmc_steps", Direction::None, C::MeanOfLogs, false},
      {K::VB, "vb", "restarts", Direction::Lower, C::Max, false},
  };
  return table;
}

const EstimatorInfo& estimator_info(EstimatorKind kind) {
  for (const auto& e : estimator_catalogue())
    if (e.kind == kind) return e;
  throw std::invalid_argument("unknown estimator");
}

const EstimatorInfo& estimator_info(const std::string& name) {
  for (const auto& e : estimator_catalogue())
    if (e.name == name) return e;
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

double combine_trials(CombineRule rule, std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("empty aggregation");
  switch (rule) {
    case CombineRule::ArithmeticMean: return log_mean_exp(v);
    case CombineRule::HarmonicMean: return log_harmonic_mean_exp(v);
    case CombineRule::Max: return *std::max_element(v.begin(), v.end());
    case CombineRule::MeanOfLogs: {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    }
  }
  throw std::invalid_argument("unknown combine rule");
}

LogEstimate run_estimator(EstimatorKind kind, long budget, const ModelSpec& spec,
                          const Dataset& data, const ExactSample* exact, RngStream rng) {
  const auto& info = estimator_info(kind);
  if (budget < 1) throw std::invalid_argument("budget must be positive");
  if (info.needs_exact) {
    if (!exact) throw std::invalid_argument("reverse chain requires an exact posterior sample");
    require_exact(*exact);
  }
  const int b = static_cast<int>(budget);
  const std::string cfg = info.budget_name + "=" + std::to_string(budget);
  LogEstimate e;
  switch (kind) {
    case EstimatorKind::AIS:
      e.value = ais_forward(spec, data, make_sigmoid_schedule(std::max(b, 2)), rng)
                    .log_weight.value();
      break;
    case EstimatorKind::ReverseAIS:
      e.value = -ais_reverse(spec, data, *exact, make_sigmoid_schedule(std::max(b, 2)), rng).value();
      break;
    case EstimatorKind::SMC: {
      SmcConfig c;
      c.sweeps_per_point = b;
      e.value = smc_run(spec, data, c, rng).value();
      break;
    }
    case EstimatorKind::SHME: {
      SmcConfig c;
      c.sweeps_per_point = b;
      e.value = shme_run(spec, data, *exact, c, rng).value();
      break;
    }
    case EstimatorKind::LW: e.value = likelihood_weighting(spec, data, b, rng).value; break;
    case EstimatorKind::HME: e.value = harmonic_mean(spec, data, *exact, b, 1, rng).value; break;
    case EstimatorKind::BIC: e.value = bic(spec, data, b, rng).value; break;
    case EstimatorKind::CMS: e.value = cms(spec, data, b, rng).value; break;
    case EstimatorKind::NS: {
      NestedSamplingConfig c;
      c.mcmc_steps = b;
      e.value = nested_sampling(spec, data, c, rng).estimate.value;
      break;
    }
    case EstimatorKind::VB: {
      VbConfig c;
      c.n_restarts = b;
      e.value = variational_bayes(spec, data, c, rng).bound.value;
      break;
    }
  }
  e.estimator_id = info.name;
  e.direction = info.direction;
  e.trial_seed = rng.seed();
  e.n_chains = 1;
  e.config = cfg;
  return e;
}

}  // namespace mlbench
