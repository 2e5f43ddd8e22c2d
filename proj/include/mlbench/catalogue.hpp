#pragma once

#include <span>
#include <string>
#include <vector>

#include "mlbench/basic_estimators.hpp"
#include "mlbench/bridge.hpp"

namespace mlbench {

enum class EstimatorKind { AIS, ReverseAIS, SMC, SHME, LW, HME, BIC, CMS, NS, VB };

// How the trials of one budget cell are combined into a single estimate.
enum class CombineRule { ArithmeticMean, HarmonicMean, Max, MeanOfLogs };

struct EstimatorInfo {
  EstimatorKind kind;
  std::string name;
  std::string budget_name;
  Direction direction;
  CombineRule combine;
  bool needs_exact;
};

const std::vector<EstimatorInfo>& estimator_catalogue();
const EstimatorInfo& estimator_info(EstimatorKind kind);
const EstimatorInfo& estimator_info(const std::string& name);

// Combined log estimate of per-trial log values.
double combine_trials(CombineRule rule, std::span<const double> log_values);

// One trial of an estimator at a single budget value. Settings other than the
// budget knob are fixed: one chain for AIS and reverse AIS, one particle for
// SMC and SHME, two particles for NS, one sweep between HME samples.
LogEstimate run_estimator(EstimatorKind kind, long budget, const ModelSpec& spec,
                          const Dataset& data, const ExactSample* exact, RngStream rng);

}  // namespace mlbench
