#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mlbench/basic_estimators.hpp"
#include "mlbench/bridge.hpp"
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

double standard_error(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

TEST(Schedule, EndpointsAndMonotonicity) {
  for (int T : {2, 3, 10, 11, 1000}) {
    for (double delta : {0.5, 4.0, 10.0}) {
      const auto s = make_sigmoid_schedule(T, delta);
      ASSERT_EQ(static_cast<int>(s.betas.size()), T);
      EXPECT_EQ(s.betas.front(), 0.0);
      EXPECT_EQ(s.betas.back(), 1.0);
      for (int t = 1; t < T; ++t) EXPECT_GE(s.betas[t], s.betas[t - 1]);
    }
  }
  EXPECT_EQ(make_sigmoid_schedule(2).betas, (std::vector<double>{0.0, 1.0}));
}

TEST(Schedule, MatchesTheSigmoidFormula) {
  const int T = 7;
  const double delta = 4.0;
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double lo = sig(delta * (2.0 * 1 / T - 1.0));
  const double hi = sig(delta * (2.0 * T / T - 1.0));
  const auto s = make_sigmoid_schedule(T, delta);
  for (int t = 1; t <= T; ++t) {
    EXPECT_NEAR(s.betas[t - 1], (sig(delta * (2.0 * t / T - 1.0)) - lo) / (hi - lo), 1e-14);
  }
  // T = 11, delta = 4: the midpoint index sits past the sigmoid's centre.
  const double lo11 = sig(4.0 * (2.0 / 11 - 1.0)), hi11 = sig(4.0);
  EXPECT_NEAR(make_sigmoid_schedule(11, 4.0).betas[5],
              (sig(4.0 / 11.0) - lo11) / (hi11 - lo11), 1e-14);
}

TEST(Schedule, Errors) {
  EXPECT_THROW(make_sigmoid_schedule(1), std::invalid_argument);
  EXPECT_THROW(make_sigmoid_schedule(5, 0.0), std::invalid_argument);
  EXPECT_THROW(make_schedule({0.0, 0.7, 0.5, 1.0}), std::invalid_argument);
  EXPECT_THROW(make_schedule({0.1, 1.0}), std::invalid_argument);
  EXPECT_NO_THROW(make_schedule({0.0, 0.5, 1.0}));
}

TEST(Ais, TwoStepScheduleIsLikelihoodWeighting) {
  for (const auto& spec : {ModelSpec(ClusteringSpec{4, 2, 2}), ModelSpec(LowRankSpec{3, 1, 1}),
                           ModelSpec(BinarySpec{3, 2, 2})}) {
    const auto in = make_instance(spec, 21);
    const RngStream rng(21, 9);
    const auto chains = ais_forward_chains(in.spec, in.sim.data, make_sigmoid_schedule(2), 40, rng);
    const auto lw = likelihood_weighting(in.spec, in.sim.data, 40, rng);
    EXPECT_EQ(log_mean_exp(chains), lw.value);
    for (int k = 0; k < 3; ++k) {
      RngStream sub = rng.substream(k);
      const auto prior = sample_prior(in.spec, sub);
      EXPECT_EQ(chains[k], log_likelihood(in.spec, prior, in.sim.data));
    }
  }
}

TEST(ReverseAis, TwoStepScheduleIsTheExactSampleHarmonicMean) {
  for (const auto& spec : {ModelSpec(ClusteringSpec{4, 2, 2}), ModelSpec(LowRankSpec{3, 1, 1}),
                           ModelSpec(BinarySpec{3, 2, 2})}) {
    const auto in = make_instance(spec, 22);
    RngStream a(22, 9), b(22, 9);
    const auto w = ais_reverse(in.spec, in.sim.data, in.exact, make_sigmoid_schedule(2), a);
    const auto hme = harmonic_mean(in.spec, in.sim.data, in.exact, 1, 0, b);
    EXPECT_EQ(-w.value(), hme.value);
    EXPECT_EQ(hme.value, log_likelihood(in.spec, in.exact.state, in.sim.data));
  }
}

TEST(Bridge, EmptyDatasetGivesZero) {
  for (const auto& spec : {ModelSpec(ClusteringSpec{0, 2, 2}), ModelSpec(BinarySpec{0, 2, 2})}) {
    const auto in = make_instance(spec, 23);
    RngStream rng(23, 0);
    const auto sched = make_sigmoid_schedule(20);
    EXPECT_EQ(ais_forward(in.spec, in.sim.data, sched, rng).log_weight.value(), 0.0);
    EXPECT_EQ(ais_reverse(in.spec, in.sim.data, in.exact, sched, rng).value(), 0.0);
    SmcConfig c;
    c.sweeps_per_point = 3;
    EXPECT_EQ(smc_run(in.spec, in.sim.data, c, rng).value(), 0.0);
    EXPECT_EQ(shme_run(in.spec, in.sim.data, in.exact, c, rng).value(), 0.0);
  }
}

TEST(Smc, SingleRowIsTheExactPredictive) {
  for (const auto& spec : {ModelSpec(ClusteringSpec{1, 3, 3}), ModelSpec(BinarySpec{1, 3, 2})}) {
    const auto in = make_instance(spec, 24);
    for (int t = 0; t < 5; ++t) {
      RngStream rng(24, t);
      SmcConfig c;
      c.sweeps_per_point = 2;
      EXPECT_NEAR(smc_run(in.spec, in.sim.data, c, rng).value(), in.truth, 1e-10);
      EXPECT_NEAR(shme_run(in.spec, in.sim.data, in.exact, c, rng).value(), in.truth, 1e-10);
    }
  }
}

TEST(Smc, ConfigurationErrors) {
  const auto in = make_instance(ClusteringSpec{3, 2, 2}, 25);
  RngStream rng(25, 0);
  SmcConfig c;
  c.resample_threshold = 1.5;
  EXPECT_THROW(smc_run(in.spec, in.sim.data, c, rng), std::invalid_argument);
  c.resample_threshold = 0.5;
  c.n_particles = 0;
  EXPECT_THROW(smc_run(in.spec, in.sim.data, c, rng), std::invalid_argument);
}

TEST(Smc, ManyParticlesWithResamplingApproachTruth) {
  const auto in = make_instance(ClusteringSpec{5, 2, 2}, 26);
  std::vector<double> v;
  for (int t = 0; t < 10; ++t) {
    RngStream rng(26, t);
    SmcConfig c;
    c.n_particles = 50;
    c.sweeps_per_point = 2;
    v.push_back(smc_run(in.spec, in.sim.data, c, rng).value());
  }
  EXPECT_NEAR(log_mean_exp(v), in.truth, 0.1);
}

TEST(Smc, BinaryOracleWithinHalfNat) {
  const auto in = make_instance(BinarySpec{3, 2, 2}, 27);
  std::vector<double> v;
  for (int t = 0; t < 25; ++t) {
    RngStream rng(27, t);
    SmcConfig c;
    c.sweeps_per_point = 20;
    v.push_back(smc_run(in.spec, in.sim.data, c, rng).value());
  }
  EXPECT_NEAR(log_mean_exp(v), in.truth, 0.5);
  EXPECT_LE(mean(v), in.truth + 2.0 * standard_error(v));
}

TEST(Reverse, RefusesSamplesWithoutProvenance) {
  const auto in = make_instance(ClusteringSpec{3, 2, 2}, 28);
  ExactSample fake = in.exact;
  fake.exact = false;
  RngStream rng(28, 0);
  try {
    ais_reverse(in.spec, in.sim.data, fake, make_sigmoid_schedule(5), rng);
    FAIL() << "expected refusal";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "reverse chain requires an exact posterior sample");
  }
  EXPECT_THROW(shme_run(in.spec, in.sim.data, fake, SmcConfig{}, rng), std::invalid_argument);
  EXPECT_THROW(harmonic_mean(in.spec, in.sim.data, fake, 5, 1, rng), std::invalid_argument);
}

TEST(Sandwich, TinyInstanceBracketsTheTruth) {
  const auto in = make_instance(ClusteringSpec{3, 2, 2}, 29);
  const RngStream rng(29, 2);
  const auto s = bdmc_sandwich(in.spec, in.sim.data, in.exact, make_sigmoid_schedule(10000), 25, rng);
  EXPECT_LE(std::abs(s.gap), 0.2);
  EXPECT_EQ(s.gap, s.upper.value - s.lower.value);
  EXPECT_EQ(s.kl_bound, s.gap);
  EXPECT_GE(in.truth, s.lower.value - 3.0);
  EXPECT_LE(in.truth, s.upper.value + 3.0);
  EXPECT_EQ(s.lower.direction, Direction::Lower);
  EXPECT_EQ(s.upper.direction, Direction::Upper);
  EXPECT_EQ(s.lower.value, log_mean_exp(s.forward_values));
  EXPECT_EQ(s.upper.value, log_harmonic_mean_exp(s.reverse_values));
}

TEST(Sandwich, TwoStepScheduleReducesToLwAndHme) {
  const auto in = make_instance(ClusteringSpec{4, 2, 2}, 30);
  const RngStream rng(30, 2);
  const auto s = bdmc_sandwich(in.spec, in.sim.data, in.exact, make_sigmoid_schedule(2), 10, rng);
  EXPECT_EQ(s.lower.value, likelihood_weighting(in.spec, in.sim.data, 10, rng.substream(0)).value);
  EXPECT_EQ(s.upper.value, log_likelihood(in.spec, in.exact.state, in.sim.data));
}

TEST(Sandwich, SmcPairBracketsTheTruth) {
  const auto in = make_instance(ClusteringSpec{4, 2, 2}, 31);
  SmcConfig c;
  c.sweeps_per_point = 20;
  const auto s = bdmc_sandwich(in.spec, in.sim.data, in.exact, c, 25, RngStream(31, 2));
  EXPECT_LE(s.lower.value, in.truth + 1.0);
  EXPECT_GE(s.upper.value, in.truth - 1.0);
  EXPECT_LE(s.gap, 1.0);
}

TEST(Sandwich, GapShrinksWithT) {
  const auto in = make_instance(ClusteringSpec{4, 2, 2}, 32);
  std::vector<double> mean_gap, se_gap;
  for (int T : {10, 100, 1000}) {
    std::vector<double> gaps;
    for (int r = 0; r < 10; ++r) {
      const auto s = bdmc_sandwich(in.spec, in.sim.data, in.exact, make_sigmoid_schedule(T), 4,
                                   RngStream(32, 100 * T + r));
      gaps.push_back(s.gap);
    }
    mean_gap.push_back(mean(gaps));
    se_gap.push_back(standard_error(gaps));
  }
  for (std::size_t i = 1; i < mean_gap.size(); ++i) {
    EXPECT_LE(mean_gap[i], mean_gap[i - 1] + 2.0 * (se_gap[i] + se_gap[i - 1]));
  }
}

TEST(Ais, JensenDirections) {
  const auto in = make_instance(ClusteringSpec{4, 2, 2}, 33);
  const auto sched = make_sigmoid_schedule(30);
  const auto fwd = ais_forward_chains(in.spec, in.sim.data, sched, 200, RngStream(33, 1));
  const auto rev = ais_reverse_chains(in.spec, in.sim.data, in.exact, sched, 200, RngStream(33, 2));
  EXPECT_LE(mean(fwd), in.truth + 2.0 * standard_error(fwd));
  EXPECT_GE(mean(rev), in.truth - 2.0 * standard_error(rev));
}

TEST(Ais, ChainsAreIndependentOfEvaluationOrder) {
  const auto in = make_instance(ClusteringSpec{4, 2, 2}, 34);
  const auto sched = make_sigmoid_schedule(50);
  const RngStream rng(34, 1);
  const auto all = ais_forward_chains(in.spec, in.sim.data, sched, 6, rng);
  for (int k = 5; k >= 0; --k) {
    RngStream sub = rng.substream(k);
    EXPECT_EQ(ais_forward(in.spec, in.sim.data, sched, sub).log_weight.value(), all[k]);
  }
}
