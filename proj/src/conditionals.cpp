#include "conditionals.hpp"

#include <boost/math/special_functions/erf.hpp>

namespace mlbench::cond {

Categorical clustering_assignment(const ClusteringSpec& spec, const Eigen::MatrixXd& theta,
                                  const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                  double beta) {
  const auto& pi = detail::mix_probs(spec);
  std::vector<double> w(spec.K);
  const double scale = beta / (2.0 * spec.noise_var);
  for (int k = 0; k < spec.K; ++k) {
    w[k] = pi[k] > 0.0 ? std::log(pi[k]) - scale * (row - theta.row(k)).squaredNorm() : kNegInf;
  }
  return Categorical::from_log_weights(w);
}

SphericalGaussian clustering_center(const ClusteringSpec& spec, double count,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& sum,
                                    double beta, double noise_scale) {
  const double noise = spec.noise_var * noise_scale;
  const double precision = 1.0 / spec.between_var + beta * count / noise;
  Eigen::VectorXd mean = (beta / (noise * precision)) * sum.transpose();
  return SphericalGaussian(std::move(mean), 1.0 / precision);
}

Categorical clustering_collapsed_assignment(const ClusteringSpec& spec,
                                            const detail::ClusterStats& stats_without_i,
                                            const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                            double beta) {
  if (beta == 0.0) {
    const auto& pi = detail::mix_probs(spec);
    std::vector<double> w(spec.K);
    for (int k = 0; k < spec.K; ++k) w[k] = pi[k] > 0.0 ? std::log(pi[k]) : kNegInf;
    return Categorical::from_log_weights(w);
  }
  return Categorical::from_log_weights(
      detail::collapsed_assignment_log_weights(spec, stats_without_i, row, spec.noise_var / beta));
}

namespace {

SharedPrecisionColumns factor_conditional(const Eigen::MatrixXd& other, const Eigen::MatrixXd& Yt,
                                          double prior_var, double noise, double beta) {
  // other is K x M with the data Yt being M x C; columns are independent.
  Eigen::MatrixXd precision = (beta / noise) * other * other.transpose();
  precision.diagonal().array() += 1.0 / prior_var;
  const Eigen::LLT<Eigen::MatrixXd> chol(precision);
  Eigen::MatrixXd means = chol.solve((beta / noise) * other * Yt);
  return SharedPrecisionColumns(std::move(means), precision);
}

}  // namespace

SharedPrecisionColumns lowrank_u(const LowRankSpec& spec, const Eigen::MatrixXd& V,
                                 const Eigen::MatrixXd& Y, double beta, double noise_scale) {
  return factor_conditional(V, Y.transpose(), spec.u_var, spec.noise_var * noise_scale, beta);
}

SharedPrecisionColumns lowrank_v(const LowRankSpec& spec, const Eigen::MatrixXd& U,
                                 const Eigen::MatrixXd& Y, double beta) {
  return factor_conditional(U.transpose(), Y, spec.v_var, spec.noise_var, beta);
}

Bernoulli binary_site(const BinarySpec& spec, int k,
                      const Eigen::Ref<const Eigen::RowVectorXd>& a_k,
                      const Eigen::Ref<const Eigen::RowVectorXd>& resid_without_k,
                      double beta) {
  const double p = detail::attr_probs(spec)[k];
  const double delta = a_k.squaredNorm() - 2.0 * resid_without_k.dot(a_k);
  const double log_w1 = (p > 0.0 ? std::log(p) : kNegInf) - beta * delta / (2.0 * spec.noise_var);
  const double log_w0 = std::log1p(-p);
  return Bernoulli::from_log_weights(log_w0, log_w1);
}

BinaryCollapsedRow::BinaryCollapsedRow(const BinarySpec& spec,
                                       const Eigen::MatrixXd& ztz_without_i,
                                       const Eigen::MatrixXd& zty_without_i,
                                       const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                       double beta)
    : spec_(spec), flat_(beta == 0.0) {
  if (flat_) return;
  const double noise = spec.noise_var / beta;
  Eigen::MatrixXd M = ztz_without_i;
  M.diagonal().array() += noise / spec.a_var;
  P_ = Eigen::LLT<Eigen::MatrixXd>(M).solve(Eigen::MatrixXd::Identity(spec.K, spec.K));
  const Eigen::MatrixXd H = P_ * zty_without_i;
  W_ = H * H.transpose();
  g_ = H * row.transpose();
  yy_ = row.squaredNorm();
  scale_ = 1.0 / (2.0 * noise);
}

double BinaryCollapsedRow::score(const Eigen::Ref<const Eigen::RowVectorXd>& z_row) const {
  if (flat_) return 0.0;
  const Eigen::VectorXd z = z_row.transpose();
  const double q = z.dot(P_ * z);
  const double h = z.dot(g_);
  const double w = z.dot(W_ * z);
  return -0.5 * spec_.D * std::log1p(q) + scale_ * (2.0 * h + q * yy_ - w) / (1.0 + q);
}

Bernoulli BinaryCollapsedRow::site(const Eigen::Ref<const Eigen::RowVectorXd>& z_row,
                                   int k) const {
  const double p = detail::attr_probs(spec_)[k];
  Eigen::RowVectorXd z = z_row;
  z(k) = 0.0;
  const double log_w0 = std::log1p(-p) + score(z);
  z(k) = 1.0;
  const double log_w1 = (p > 0.0 ? std::log(p) : kNegInf) + score(z);
  return Bernoulli::from_log_weights(log_w0, log_w1);
}

SharedPrecisionColumns binary_a(const BinarySpec& spec, const Eigen::MatrixXd& Z,
                                const Eigen::MatrixXd& Y, double beta, double noise_scale) {
  return factor_conditional(Z.transpose(), Y, spec.a_var, spec.noise_var * noise_scale, beta);
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double log_normal_mass(double a, double b) {
  using boost::math::erfc;
  double mass;
  if (a >= 0.0) {
    mass = 0.5 * (erfc(a * kInvSqrt2) - erfc(b * kInvSqrt2));
  } else if (b <= 0.0) {
    mass = 0.5 * (erfc(-b * kInvSqrt2) - erfc(-a * kInvSqrt2));
  } else {
    mass = 1.0 - 0.5 * erfc(b * kInvSqrt2) - 0.5 * erfc(-a * kInvSqrt2);
  }
  return std::log(mass);
}

}  // namespace

double TruncatedGaussian::sample(RngStream& rng) const {
  return sample_truncated_normal(std::sqrt(var), lo, hi, rng);
}

double TruncatedGaussian::log_density(double x) const {
  if (x < lo || x > hi) return kNegInf;
  const double sd = std::sqrt(var);
  return Gaussian(0.0, var).log_density(x) - log_normal_mass(lo / sd, hi / sd);
}

}  // namespace mlbench::cond
