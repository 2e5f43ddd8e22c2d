#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mlbench/basic_estimators.hpp"
#include "test_support.hpp"

using namespace mlbench;
using namespace testing_support;

namespace {

struct Instance {
  ModelSpec spec;
  Simulation sim;
  ExactSample exact;
  double truth = 0.0;
};

Instance make_instance(ModelSpec spec, std::uint64_t seed) {
  Instance in;
  in.spec = validated(std::move(spec));
  RngStream rng(seed, 1);
  in.sim = simulate(in.spec, rng);
  in.exact = exact_sample_of(in.spec, in.sim, seed);
  in.truth = brute_force_log_ml(in.spec, in.sim.data);
  return in;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<Instance> oracle_instances() {
  return {make_instance(ClusteringSpec{4, 2, 2}, 41), make_instance(LowRankSpec{2, 1, 1}, 42),
          make_instance(LowRankSpec{3, 1, 1}, 43), make_instance(BinarySpec{3, 2, 2}, 44)};
}

}  // namespace

TEST(LikelihoodWeighting, EmptyDatasetIsZero) {
  const auto in = make_instance(ClusteringSpec{0, 2, 3}, 1);
  EXPECT_EQ(likelihood_weighting(in.spec, in.sim.data, 10, RngStream(1, 0)).value, 0.0);
  EXPECT_THROW(likelihood_weighting(in.spec, in.sim.data, 0, RngStream(1, 0)), std::invalid_argument);
}

TEST(LikelihoodWeighting, FlatLikelihoodHasVanishingSpread) {
  ClusteringSpec raw{3, 2, 2};
  raw.noise_var = 1e8;
  const auto spec = validated(raw);
  const Dataset data{Eigen::MatrixXd::Constant(3, 2, 0.5)};
  const double flat = -3.0 * (kLog2PiT + std::log(1e8));
  std::vector<double> v;
  for (int t = 0; t < 20; ++t) {
    v.push_back(likelihood_weighting(spec, data, 10, RngStream(2, t)).value);
  }
  for (double x : v) EXPECT_NEAR(x, flat, 1e-6);
}

TEST(LikelihoodWeighting, ConsistentOnATinyInstance) {
  const auto in = make_instance(ClusteringSpec{3, 2, 2}, 3);
  const auto e = likelihood_weighting(in.spec, in.sim.data, 1000000, RngStream(3, 0));
  EXPECT_NEAR(e.value, in.truth, 0.5);
  EXPECT_EQ(e.direction, Direction::Lower);
}

TEST(HarmonicMean, SingleSampleIsTheExactSampleLikelihood) {
  for (const auto& in : oracle_instances()) {
    RngStream rng(4, 0);
    const auto e = harmonic_mean(in.spec, in.sim.data, in.exact, 1, 0, rng);
    EXPECT_EQ(e.value, log_likelihood(in.spec, in.exact.state, in.sim.data));
    EXPECT_EQ(e.direction, Direction::Upper);
  }
  const auto empty = make_instance(BinarySpec{0, 2, 2}, 5);
  RngStream rng(5, 0);
  EXPECT_EQ(harmonic_mean(empty.spec, empty.sim.data, empty.exact, 20, 1, rng).value, 0.0);
}

TEST(HarmonicMean, OverestimatesOnAverage) {
  const auto in = make_instance(ClusteringSpec{4, 2, 2}, 6);
  std::vector<double> v;
  for (int t = 0; t < 100; ++t) {
    RngStream rng(6, t);
    v.push_back(harmonic_mean(in.spec, in.sim.data, in.exact, 20, 1, rng).value);
  }
  EXPECT_GE(mean(v), in.truth);
}

TEST(Bic, PenaltyArithmetic) {
  const auto c = validated(ClusteringSpec{50, 25, 10});
  EXPECT_EQ(bic_parameter_count(c), 250);
  EXPECT_NEAR(bic_value(c, 0.0, 50), -125.0 * std::log(50.0), 1e-12);
  const auto l = validated(LowRankSpec{50, 25, 5});
  EXPECT_EQ(bic_parameter_count(l), 5 * 75);
  const auto b = validated(BinarySpec{50, 25, 10});
  EXPECT_EQ(bic_parameter_count(b), 250);
  EXPECT_NEAR(bic_value(b, -10.0, 50), -10.0 - 125.0 * std::log(50.0), 1e-12);
}

TEST(Bic, NearNoiselessDataDrivesTheLikelihoodTermUp) {
  ClusteringSpec raw{6, 2, 2};
  raw.noise_var = 1e-8;
  const auto spec = validated(raw);
  Eigen::MatrixXd Y(6, 2);
  Y << 1, 1, 1, 1, 1, 1, -1, 0.5, -1, 0.5, -1, 0.5;
  RngStream rng(7, 0);
  const auto e = bic(spec, Dataset{Y}, 200, rng);
  EXPECT_GT(e.value, 50.0);
  EXPECT_EQ(e.direction, Direction::None);
}

TEST(Bic, TinyInstanceIsFiniteAndRecorded) {
  const auto in = make_instance(ClusteringSpec{4, 2, 2}, 8);
  RngStream rng(8, 0);
  const auto e = bic(in.spec, in.sim.data, kMapSearchSweeps, rng);
  EXPECT_TRUE(std::isfinite(e.value));
  RecordProperty("bic_minus_truth", std::to_string(e.value - in.truth));
}

TEST(MapSearch, ReturnsTheBestVisitedJoint) {
  for (const auto& in : oracle_instances()) {
    RngStream rng(9, 0);
    const auto map = map_search(in.spec, in.sim.data, kMapSearchSweeps, rng);
    EXPECT_EQ(map.log_joint, log_joint(in.spec, map.state, in.sim.data));
    EXPECT_GE(map.log_joint, log_joint(in.spec, in.exact.state, in.sim.data) - 1e-6);
    EXPECT_GE(map.log_joint, log_joint(in.spec, mode_sweep(in.spec, map.state, in.sim.data), in.sim.data) - 1e-9);
  }
}

TEST(Cms, ExactForASingleSiteModel) {
  for (const auto& spec : {ModelSpec(ClusteringSpec{1, 3, 3}), ModelSpec(BinarySpec{1, 3, 1})}) {
    const auto in = make_instance(spec, 10);
    for (int n : {0, 1, 10}) {
      RngStream rng(10, n);
      const auto e = cms_at(in.spec, in.sim.data, in.exact.state, n, rng);
      EXPECT_NEAR(e.value, in.truth, 1e-9);
      EXPECT_EQ(e.direction, Direction::Lower);
    }
  }
}

TEST(Cms, TinyClusteringWithinOneNat) {
  const auto in = make_instance(ClusteringSpec{4, 2, 2}, 11);
  RngStream rng(11, 0);
  EXPECT_NEAR(cms(in.spec, in.sim.data, 10000, rng).value, in.truth, 1.0);
}

TEST(Cms, NegativeTransitionCountIsAnError) {
  const auto in = make_instance(ClusteringSpec{2, 2, 2}, 12);
  RngStream rng(12, 0);
  EXPECT_THROW(cms_at(in.spec, in.sim.data, in.exact.state, -1, rng), std::invalid_argument);
}

TEST(NestedSampling, VolumeBookkeeping) {
  EXPECT_EQ(ns_volume(2, 3), std::pow(2.0 / 3.0, 3.0));
  EXPECT_NEAR(ns_volume(2, 3), 8.0 / 27.0, 1e-16);
  EXPECT_EQ(ns_volume(5, 0), 1.0);
  const auto in = make_instance(ClusteringSpec{3, 2, 2}, 13);
  RngStream rng(13, 0);
  NestedSamplingConfig c;
  c.mcmc_steps = 5;
  const auto r = nested_sampling(in.spec, in.sim.data, c, rng);
  ASSERT_FALSE(r.trace.volumes.empty());
  for (std::size_t t = 0; t < r.trace.volumes.size(); ++t) {
    EXPECT_EQ(r.trace.volumes[t], std::pow(2.0 / 3.0, static_cast<double>(t)));
    if (t > 0) EXPECT_GE(r.trace.cutoffs[t], r.trace.cutoffs[t - 1]);
  }
  EXPECT_EQ(r.trace.n_particles, 2);
  EXPECT_EQ(r.estimate.direction, Direction::None);
  EXPECT_GE(r.trace.log_upper, r.estimate.value);
}

TEST(NestedSampling, ConstantLikelihoodGivesItsLog) {
  const auto in = make_instance(ClusteringSpec{0, 2, 2}, 14);
  RngStream rng(14, 0);
  const auto r = nested_sampling(in.spec, in.sim.data, NestedSamplingConfig{}, rng);
  EXPECT_NEAR(r.estimate.value, 0.0, 1e-9);
}

TEST(NestedSampling, StepCapRaises) {
  const auto in = make_instance(ClusteringSpec{4, 2, 2}, 15);
  RngStream rng(15, 0);
  NestedSamplingConfig c;
  c.max_steps = 3;
  try {
    nested_sampling(in.spec, in.sim.data, c, rng);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "stop criterion never met");
  }
  c.max_steps = 1000000;
  c.n_particles = 1;
  EXPECT_THROW(nested_sampling(in.spec, in.sim.data, c, rng), std::invalid_argument);
}

TEST(NestedSampling, TinyInstanceMeanWithinOneNat) {
  const auto in = make_instance(ClusteringSpec{3, 2, 2}, 16);
  std::vector<double> v;
  for (int t = 0; t < 25; ++t) {
    RngStream rng(16, t);
    NestedSamplingConfig c;
    c.mcmc_steps = 20;
    v.push_back(nested_sampling(in.spec, in.sim.data, c, rng).estimate.value);
  }
  EXPECT_NEAR(mean(v), in.truth, 1.0);
}

TEST(VariationalBayes, BoundIsMonotoneWithinARestart) {
  for (const auto& in : oracle_instances()) {
    RngStream rng(17, 0);
    std::vector<double> trace;
    vb_optimize(in.spec, in.sim.data, VbConfig{}, rng, &trace);
    ASSERT_GT(trace.size(), 1u);
    for (std::size_t i = 1; i < trace.size(); ++i) {
      EXPECT_GE(trace[i], trace[i - 1] - 1e-6 * std::max(1.0, std::abs(trace[i - 1])));
    }
  }
}

TEST(VariationalBayes, SymmetryCorrectionIsLogKFactorial) {
  const auto in = make_instance(ClusteringSpec{4, 2, 2}, 18);
  const auto r = variational_bayes(in.spec, in.sim.data, VbConfig{}, RngStream(18, 0));
  EXPECT_NEAR(r.corrected.value - r.bound.value, std::log(2.0), 1e-12);
  const auto big = validated(ClusteringSpec{12, 3, 10});
  RngStream sim(19, 1);
  const auto data = simulate(big, sim).data;
  VbConfig c;
  c.max_iterations = 200;
  const auto rb = variational_bayes(big, data, c, RngStream(19, 0));
  EXPECT_NEAR(rb.corrected.value - rb.bound.value, std::log(3628800.0), 1e-9);
}

TEST(VariationalBayes, BestBoundNeverExceedsTheTruth) {
  for (const auto& in : oracle_instances()) {
    VbConfig c;
    c.n_restarts = 5;
    const auto r = variational_bayes(in.spec, in.sim.data, c, RngStream(20, 0));
    EXPECT_LE(r.bound.value, in.truth);
    EXPECT_LE(r.corrected.value, in.truth + std::lgamma(components(in.spec) + 1.0) + 1e-12);
    EXPECT_EQ(r.bound.direction, Direction::Lower);
    ASSERT_EQ(r.restart_bounds.size(), 5u);
    EXPECT_EQ(r.bound.value, *std::max_element(r.restart_bounds.begin(), r.restart_bounds.end()));
  }
}

TEST(VariationalBayes, FixedPointsAreLocalMaxima) {
  for (const auto& in : oracle_instances()) {
    RngStream rng(21, 0);
    const auto q = vb_optimize(in.spec, in.sim.data, VbConfig{}, rng);
    EXPECT_LE(vb_perturbation_gain(in.spec, in.sim.data, q), 1e-8);
  }
}

TEST(VariationalBayes, RestartCountMustBePositive) {
  const auto in = make_instance(ClusteringSpec{2, 2, 2}, 22);
  VbConfig c;
  c.n_restarts = 0;
  EXPECT_THROW(variational_bayes(in.spec, in.sim.data, c, RngStream(22, 0)), std::invalid_argument);
}
