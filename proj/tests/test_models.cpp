#include <gtest/gtest.h>

#include <cmath>

#include "mlbench/models.hpp"

using namespace mlbench;

namespace {

constexpr double kLog2PiT = 1.8378770664093454835606594728112;

// log N(x; 0, C) by Cholesky.
double dense_log_normal(const Eigen::VectorXd& x, const Eigen::MatrixXd& C) {
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  const Eigen::MatrixXd L = llt.matrixL();
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  return -0.5 * x.size() * kLog2PiT - 0.5 * log_det - 0.5 * x.dot(llt.solve(x));
}

double log_add(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Sum over assignments of prod pi * prod_d N(y_d; 0, s2 [z_i == z_j] + noise I).
double clustering_oracle(const ClusteringSpec& s, const Eigen::MatrixXd& Y) {
  const int N = static_cast<int>(Y.rows());
  double total = -std::numeric_limits<double>::infinity();
  const int configs = static_cast<int>(std::pow(s.K, N));
  for (int c = 0; c < configs; ++c) {
    std::vector<int> z(N);
    int rem = c;
    double lp = 0.0;
    for (int i = 0; i < N; ++i) {
      z[i] = rem % s.K;
      rem /= s.K;
      lp += std::log(s.mix_probs[z[i]]);
    }
    Eigen::MatrixXd C = s.noise_var * Eigen::MatrixXd::Identity(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        if (z[i] == z[j]) C(i, j) += s.between_var;
    for (int d = 0; d < Y.cols(); ++d) lp += dense_log_normal(Y.col(d), C);
    total = log_add(total, lp);
  }
  return total;
}

// Sum over binary matrices of prior * prod_d N(y_d; 0, a Z Z^T + noise I).
double binary_oracle(const BinarySpec& s, const Eigen::MatrixXd& Y) {
  const int N = static_cast<int>(Y.rows());
  const int bits = N * s.K;
  double total = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < (1 << bits); ++c) {
    Eigen::MatrixXd Z(N, s.K);
    double lp = 0.0;
    for (int i = 0; i < N; ++i) {
      for (int k = 0; k < s.K; ++k) {
        Z(i, k) = (c >> (i * s.K + k)) & 1;
        lp += std::log(Z(i, k) ? s.attr_probs[k] : 1.0 - s.attr_probs[k]);
      }
    }
    const Eigen::MatrixXd C =
        s.a_var * Z * Z.transpose() + s.noise_var * Eigen::MatrixXd::Identity(N, N);
    for (int d = 0; d < Y.cols(); ++d) lp += dense_log_normal(Y.col(d), C);
    total = log_add(total, lp);
  }
  return total;
}

// K = 1, D = 1: integrate v numerically, u in closed form (Y_i | v iid N(0, u v^2 + noise)).
double lowrank_rank_one_oracle(const LowRankSpec& s, const Eigen::MatrixXd& Y) {
  const int n = 400001;
  const double half = 15.0 * std::sqrt(s.v_var);
  const double h = 2.0 * half / (n - 1);
  std::vector<double> logs(n);
  double m = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) {
    const double v = -half + j * h;
    const double var = s.u_var * v * v + s.noise_var;
    double lp = -0.5 * (kLog2PiT + std::log(s.v_var)) - 0.5 * v * v / s.v_var;
    for (int i = 0; i < Y.rows(); ++i) lp += -0.5 * (kLog2PiT + std::log(var)) - 0.5 * Y(i, 0) * Y(i, 0) / var;
    logs[j] = lp;
    m = std::max(m, lp);
  }
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += (j == 0 || j == n - 1 ? 0.5 : 1.0) * std::exp(logs[j] - m);
  return m + std::log(sum * h);
}

std::vector<ModelSpec> small_specs() {
  return {validated(ClusteringSpec{4, 3, 2}), validated(LowRankSpec{4, 3, 2}),
          validated(BinarySpec{4, 3, 2})};
}

}  // namespace

TEST(Specs, DefaultsAreFilledAndChecked) {
  const auto c = std::get<ClusteringSpec>(validated(ClusteringSpec{5, 2, 4}));
  ASSERT_EQ(c.mix_probs.size(), 4u);
  for (double p : c.mix_probs) EXPECT_DOUBLE_EQ(p, 0.25);
  const auto b = std::get<BinarySpec>(validated(BinarySpec{5, 2, 3}));
  for (double p : b.attr_probs) EXPECT_DOUBLE_EQ(p, 0.3);
  EXPECT_THROW(validated(ClusteringSpec{5, 0, 2}), std::invalid_argument);
  EXPECT_THROW(validated(ClusteringSpec{5, 2, 0}), std::invalid_argument);
  EXPECT_THROW(validated(ClusteringSpec{-1, 2, 2}), std::invalid_argument);
  ClusteringSpec bad{5, 2, 2};
  bad.noise_var = 0.0;
  EXPECT_THROW(validated(bad), std::invalid_argument);
  ClusteringSpec wrong{5, 2, 2};
  wrong.mix_probs = {0.5, 0.2};
  EXPECT_THROW(validated(wrong), std::invalid_argument);
  EXPECT_THROW(validated(LowRankSpec{3, 2, 3}), std::invalid_argument);
}

TEST(Specs, HashSeparatesSpecs) {
  const auto a = validated(ClusteringSpec{5, 2, 2});
  auto b_raw = ClusteringSpec{5, 2, 2};
  b_raw.noise_var = 0.2;
  EXPECT_EQ(spec_hash(a), spec_hash(validated(ClusteringSpec{5, 2, 2})));
  EXPECT_NE(spec_hash(a), spec_hash(validated(b_raw)));
  EXPECT_NE(spec_hash(validated(LowRankSpec{5, 2, 2})), spec_hash(validated(BinarySpec{5, 2, 2})));
}

TEST(Simulate, EqualSeedsGiveEqualData) {
  for (const auto& spec : small_specs()) {
    RngStream a(3, 1), b(3, 1), c(4, 1);
    const auto sa = simulate(spec, a);
    const auto sb = simulate(spec, b);
    const auto sc = simulate(spec, c);
    EXPECT_EQ(sa.data.Y, sb.data.Y);
    EXPECT_NE(sa.data.Y, sc.data.Y);
    EXPECT_EQ(sa.data.N(), rows(spec));
    EXPECT_EQ(sa.data.D(), dims(spec));
    EXPECT_NO_THROW(check_state(spec, sa.state));
  }
}

TEST(Simulate, BinaryEntriesAreZeroOrOne) {
  RngStream rng(5, 1);
  const auto spec = validated(BinarySpec{30, 4, 6});
  const auto sim = simulate(spec, rng);
  const auto& Z = std::get<BinaryState>(sim.state).Z;
  EXPECT_TRUE(((Z.array() == 0.0) || (Z.array() == 1.0)).all());
}

TEST(Simulate, TinyNoiseReproducesTheSignal) {
  ClusteringSpec c{20, 3, 4};
  c.noise_var = 1e-12;
  LowRankSpec l{20, 3, 2};
  l.noise_var = 1e-12;
  BinarySpec b{20, 3, 4};
  b.noise_var = 1e-12;
  RngStream rng(6, 1);
  {
    const auto sim = simulate(validated(c), rng);
    const auto& x = std::get<ClusteringState>(sim.state);
    for (int i = 0; i < 20; ++i)
      EXPECT_LT((sim.data.Y.row(i) - x.theta.row(x.z[i])).norm(), 1e-4);
  }
  {
    const auto sim = simulate(validated(l), rng);
    const auto& x = std::get<LowRankState>(sim.state);
    EXPECT_LT((sim.data.Y - x.U * x.V).norm(), 1e-4);
  }
  {
    const auto sim = simulate(validated(b), rng);
    const auto& x = std::get<BinaryState>(sim.state);
    EXPECT_LT((sim.data.Y - x.Z * x.A).norm(), 1e-4);
  }
}

TEST(Simulate, ClusteringStateMatchesPriorMoments) {
  RngStream rng(7, 1);
  const auto spec = validated(ClusteringSpec{1, 1, 1});
  const int n = 40000;
  double s = 0.0, ss = 0.0;
  for (int t = 0; t < n; ++t) {
    const auto sim = simulate(spec, rng);
    const double y = sim.data.Y(0, 0);
    s += y;
    ss += y * y;
  }
  EXPECT_LT(std::abs(s / n), 4.0 * std::sqrt(1.1 / n));
  EXPECT_NEAR(ss / n, 1.1, 0.05);
}

TEST(LogPrior, BinaryZeroMatrix) {
  BinarySpec b{2, 2, 3};
  b.attr_probs = {0.5, 0.5, 0.5};
  const auto spec = validated(b);
  BinaryState x{Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(3, 2)};
  EXPECT_NEAR(log_prior(spec, x), 6.0 * std::log(0.5) - 0.5 * 6.0 * kLog2PiT, 1e-13);
}

TEST(LogPrior, ClusteringAndLowRankAtZero) {
  const auto c = validated(ClusteringSpec{3, 2, 2});
  ClusteringState xc{{0, 1, 1}, Eigen::MatrixXd::Zero(2, 2)};
  EXPECT_NEAR(log_prior(c, xc), 3.0 * std::log(0.5) - 0.5 * 4.0 * kLog2PiT, 1e-13);
  LowRankSpec l{3, 2, 1};
  l.u_var = 2.0;
  LowRankState xl{Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Zero(1, 2)};
  EXPECT_NEAR(log_prior(validated(l), xl),
              -1.5 * (kLog2PiT + std::log(2.0)) - 1.0 * kLog2PiT, 1e-13);
}

TEST(LogLikelihood, DataOnTheMeans) {
  const auto spec = validated(ClusteringSpec{2, 3, 2});
  ClusteringState x{{0, 1}, Eigen::MatrixXd::Random(2, 3)};
  Dataset d{x.theta};
  EXPECT_NEAR(log_likelihood(spec, x, d), -3.0 * (kLog2PiT + std::log(0.1)), 1e-12);
  Dataset shifted{x.theta.array() + 1.0};
  EXPECT_NEAR(log_likelihood(spec, x, shifted),
              -3.0 * (kLog2PiT + std::log(0.1)) - 0.5 * 6.0 / 0.1, 1e-12);
}

TEST(LogJoint, IsPriorPlusLikelihoodAndTemperingIsAffine) {
  for (const auto& spec : small_specs()) {
    RngStream rng(8, 1);
    const auto sim = simulate(spec, rng);
    const auto other = simulate(spec, rng);
    const double lp = log_prior(spec, other.state);
    const double ll = log_likelihood(spec, other.state, sim.data);
    EXPECT_NEAR(log_joint(spec, other.state, sim.data), lp + ll, 1e-10);
    EXPECT_DOUBLE_EQ(tempered_log_f(spec, other.state, sim.data, 0.0), lp);
    EXPECT_NEAR(tempered_log_f(spec, other.state, sim.data, 1.0), lp + ll, 1e-10);
    for (double beta : {0.1, 0.37, 0.8}) {
      EXPECT_NEAR(tempered_log_f(spec, other.state, sim.data, beta), lp + beta * ll,
                  1e-10 * (1.0 + std::abs(ll)));
    }
    EXPECT_THROW(tempered_log_f(spec, other.state, sim.data, 1.5), std::invalid_argument);
  }
}

TEST(LogJoint, WrongShapesAreRejected) {
  const auto spec = validated(ClusteringSpec{3, 2, 2});
  ClusteringState bad{{0, 1}, Eigen::MatrixXd::Zero(2, 2)};
  EXPECT_THROW(log_prior(spec, bad), std::invalid_argument);
  BinaryState other{Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(2, 2)};
  EXPECT_THROW(log_prior(spec, other), std::invalid_argument);
  Dataset d{Eigen::MatrixXd::Zero(4, 2)};
  ClusteringState ok{{0, 1, 1}, Eigen::MatrixXd::Zero(2, 2)};
  EXPECT_THROW(log_likelihood(spec, ok, d), std::invalid_argument);
}

TEST(CollapsedLikelihood, MatchesDenseCovariance) {
  RngStream rng(9, 1);
  const auto spec = validated(ClusteringSpec{5, 3, 3});
  const auto& s = std::get<ClusteringSpec>(spec);
  const auto sim = simulate(spec, rng);
  const auto& x = std::get<ClusteringState>(sim.state);
  Eigen::MatrixXd C = s.noise_var * Eigen::MatrixXd::Identity(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (x.z[i] == x.z[j]) C(i, j) += s.between_var;
  double expect = 0.0;
  for (int d = 0; d < 3; ++d) expect += dense_log_normal(sim.data.Y.col(d), C);
  EXPECT_NEAR(collapsed_log_likelihood(spec, sim.state, sim.data), expect, 1e-10);
  EXPECT_NEAR(collapsed_log_joint(spec, sim.state, sim.data), expect + 5.0 * std::log(1.0 / 3.0),
              1e-10);

  const auto bspec = validated(BinarySpec{5, 3, 2});
  const auto& b = std::get<BinarySpec>(bspec);
  const auto bsim = simulate(bspec, rng);
  const auto& Z = std::get<BinaryState>(bsim.state).Z;
  const Eigen::MatrixXd CB = b.a_var * Z * Z.transpose() + b.noise_var * Eigen::MatrixXd::Identity(5, 5);
  double bexpect = 0.0;
  for (int d = 0; d < 3; ++d) bexpect += dense_log_normal(bsim.data.Y.col(d), CB);
  EXPECT_NEAR(collapsed_log_likelihood(bspec, bsim.state, bsim.data), bexpect, 1e-10);
}

TEST(BruteForce, ClusteringMatchesIndependentEnumeration) {
  RngStream rng(10, 1);
  const auto spec = validated(ClusteringSpec{3, 2, 2});
  const auto sim = simulate(spec, rng);
  const double oracle = clustering_oracle(std::get<ClusteringSpec>(spec), sim.data.Y);
  EXPECT_NEAR(brute_force_log_ml(spec, sim.data), oracle, 1e-10);

  ClusteringSpec skew{4, 2, 3};
  skew.mix_probs = {0.6, 0.3, 0.1};
  skew.between_var = 2.0;
  skew.noise_var = 0.5;
  const auto s2 = validated(skew);
  const auto sim2 = simulate(s2, rng);
  EXPECT_NEAR(brute_force_log_ml(s2, sim2.data),
              clustering_oracle(std::get<ClusteringSpec>(s2), sim2.data.Y), 1e-10);
}

TEST(BruteForce, ClusteringFrozenValue) {
  const auto spec = validated(ClusteringSpec{3, 2, 2});
  Eigen::MatrixXd Y(3, 2);
  Y << 0.5, -0.2, 0.4, -0.1, -1.0, 0.8;
  const Dataset d{Y};
  const double oracle = clustering_oracle(std::get<ClusteringSpec>(spec), Y);
  EXPECT_NEAR(oracle, -6.3338728090635774, 1e-12);
  EXPECT_NEAR(brute_force_log_ml(spec, d), oracle, 1e-10);
}

TEST(BruteForce, BinaryMatchesSixteenTermEnumeration) {
  BinarySpec b{2, 1, 2};
  b.attr_probs = {0.3, 0.6};
  const auto spec = validated(b);
  Eigen::MatrixXd Y(2, 1);
  Y << 0.9, -0.3;
  const double oracle = binary_oracle(std::get<BinarySpec>(spec), Y);
  EXPECT_NEAR(brute_force_log_ml(spec, Dataset{Y}), oracle, 1e-10);

  RngStream rng(11, 1);
  const auto s3 = validated(BinarySpec{3, 2, 3});
  const auto sim = simulate(s3, rng);
  EXPECT_NEAR(brute_force_log_ml(s3, sim.data),
              binary_oracle(std::get<BinarySpec>(s3), sim.data.Y), 1e-10);
}

TEST(BruteForce, LowRankMatchesOneDimensionalIntegration) {
  LowRankSpec l{2, 1, 1};
  const auto spec = validated(l);
  Eigen::MatrixXd Y(2, 1);
  Y << 0.7, -1.2;
  EXPECT_NEAR(brute_force_log_ml(spec, Dataset{Y}), lowrank_rank_one_oracle(l, Y), 1e-6);
  LowRankSpec wide{3, 1, 1};
  wide.u_var = 0.5;
  wide.v_var = 2.0;
  wide.noise_var = 0.3;
  Eigen::MatrixXd Y3(3, 1);
  Y3 << 0.1, 2.0, -0.4;
  EXPECT_NEAR(brute_force_log_ml(validated(wide), Dataset{Y3}), lowrank_rank_one_oracle(wide, Y3),
              1e-6);
}

TEST(BruteForce, EmptyDatasetIsZero) {
  for (const auto& spec : {validated(ClusteringSpec{4, 3, 2}), validated(BinarySpec{4, 3, 2})}) {
    const auto s0 = with_rows(spec, 0);
    Dataset d{Eigen::MatrixXd::Zero(0, dims(spec))};
    EXPECT_EQ(brute_force_log_ml(s0, d), 0.0);
  }
}

TEST(BruteForce, RefusesLargeInstances) {
  const auto c = validated(ClusteringSpec{50, 2, 10});
  try {
    brute_force_log_ml(c, Dataset{Eigen::MatrixXd::Zero(50, 2)});
    FAIL() << "expected refusal";
  } catch (const std::invalid_argument& e) {
    EXPECT_EQ(std::string(e.what()).rfind("instance too large", 0), 0u);
  }
  EXPECT_THROW(brute_force_log_ml(validated(BinarySpec{10, 2, 5}),
                                  Dataset{Eigen::MatrixXd::Zero(10, 2)}),
               std::invalid_argument);
  EXPECT_THROW(brute_force_log_ml(validated(LowRankSpec{4, 3, 2}),
                                  Dataset{Eigen::MatrixXd::Zero(4, 3)}),
               std::invalid_argument);
}

TEST(Predictive, FirstRowEqualsOneRowMarginal) {
  RngStream rng(12, 1);
  for (const auto& spec : {validated(ClusteringSpec{1, 3, 3}), validated(BinarySpec{1, 3, 3})}) {
    const auto sim = simulate(spec, rng);
    const auto empty_spec = with_rows(spec, 0);
    LatentState empty = std::holds_alternative<ClusteringSpec>(spec)
                            ? LatentState(ClusteringState{{}, Eigen::MatrixXd::Zero(3, 3)})
                            : LatentState(BinaryState{Eigen::MatrixXd::Zero(0, 3),
                                                      Eigen::MatrixXd::Zero(3, 3)});
    const double pred =
        predictive_loglik(empty_spec, empty, sim.data.prefix(0), sim.data.Y.row(0));
    EXPECT_NEAR(pred, brute_force_log_ml(spec, sim.data), 1e-10);
  }
}

TEST(Predictive, LowRankIsGaussianGivenV) {
  RngStream rng(13, 1);
  const auto spec = validated(LowRankSpec{4, 3, 2});
  const auto& l = std::get<LowRankSpec>(spec);
  const auto sim = simulate(spec, rng);
  const auto& V = std::get<LowRankState>(sim.state).V;
  const Eigen::MatrixXd C = l.u_var * V.transpose() * V + l.noise_var * Eigen::MatrixXd::Identity(3, 3);
  LowRankState partial{std::get<LowRankState>(sim.state).U.topRows(3), V};
  const double pred =
      predictive_loglik(with_rows(spec, 3), partial, sim.data.prefix(3), sim.data.Y.row(3));
  EXPECT_NEAR(pred, dense_log_normal(sim.data.Y.row(3).transpose(), C), 1e-10);
}

TEST(Predictive, BinaryRefusesWideEnumeration) {
  const auto spec = validated(BinarySpec{0, 2, kMaxEnumerationBits + 1});
  BinaryState empty{Eigen::MatrixXd::Zero(0, kMaxEnumerationBits + 1),
                    Eigen::MatrixXd::Zero(kMaxEnumerationBits + 1, 2)};
  Eigen::RowVectorXd y = Eigen::RowVectorXd::Zero(2);
  EXPECT_THROW(predictive_loglik(spec, empty, Dataset{Eigen::MatrixXd::Zero(0, 2)}, y),
               std::invalid_argument);
}

TEST(Densities, FiniteOverRandomSpecs) {
  RngStream rng(14, 1);
  for (int t = 0; t < 60; ++t) {
    const int N = 1 + static_cast<int>(rng.uniform_index(8));
    const int D = 1 + static_cast<int>(rng.uniform_index(5));
    const int K = 1 + static_cast<int>(rng.uniform_index(std::min(N, D)));
    const double noise = std::exp(rng.normal());
    ClusteringSpec c{N, D, K};
    c.noise_var = noise;
    LowRankSpec l{N, D, K};
    l.noise_var = noise;
    BinarySpec b{N, D, K};
    b.noise_var = noise;
    for (const auto& spec : {validated(c), validated(l), validated(b)}) {
      const auto sim = simulate(spec, rng);
      EXPECT_TRUE(std::isfinite(log_joint(spec, sim.state, sim.data)));
      EXPECT_TRUE(std::isfinite(collapsed_log_joint(spec, sim.state, sim.data)));
    }
  }
}

TEST(FactorMarginal, MatchesDenseCovariance) {
  RngStream rng(15, 1);
  Eigen::MatrixXd X(4, 3), W(4, 2);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  for (int i = 0; i < W.size(); ++i) W.data()[i] = rng.normal();
  const Eigen::MatrixXd C = 0.7 * W * W.transpose() + 0.2 * Eigen::MatrixXd::Identity(4, 4);
  double expect = 0.0;
  for (int j = 0; j < 3; ++j) expect += dense_log_normal(X.col(j), C);
  EXPECT_NEAR(factor_gaussian_log_marginal(X, W, 0.7, 0.2), expect, 1e-10);
}

TEST(LogFactorial, SmallValues) {
  EXPECT_NEAR(log_factorial(0), 0.0, 1e-15);
  EXPECT_NEAR(log_factorial(5), std::log(120.0), 1e-13);
  EXPECT_NEAR(log_factorial(10), std::log(3628800.0), 1e-12);
}
