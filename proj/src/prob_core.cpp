#include "mlbench/prob_core.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include <boost/math/special_functions/erf.hpp>

namespace mlbench {

LogWeight::LogWeight(double value) : value_(value) {
  if (std::isnan(value) || value == std::numeric_limits<double>::infinity()) {
    throw std::domain_error("log weight must be finite or -inf, got " +
                            std::to_string(value));
  }
}

LogWeight& LogWeight::operator+=(double log_increment) {
  *this = LogWeight(value_ + log_increment);
  return *this;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("empty aggregation");
  const double m = *std::max_element(values.begin(), values.end());
  if (m == kNegInf) return kNegInf;
  if (std::isinf(m)) return m;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double log_mean_exp(std::span<const double> values) {
  return log_sum_exp(values) - std::log(static_cast<double>(values.size()));
}

double log_harmonic_mean_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("empty aggregation");
  std::vector<double> negated(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == kNegInf) {
      throw std::domain_error("zero weight in harmonic mean");
    }
    negated[i] = -values[i];
  }
  return -log_mean_exp(negated);
}

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : RngStream(std::vector<std::uint64_t>{seed, stream_id}) {}

RngStream::RngStream(std::vector<std::uint64_t> key) : key_(std::move(key)) {
  reseed();
}

void RngStream::reseed() {
  // Each key word is whitened before entering the seed sequence so that
  // adjacent stream ids do not give correlated engine states.
  std::vector<std::uint32_t> words;
  words.reserve(2 * key_.size() + 1);
  std::uint64_t chain = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t k : key_) {
    chain = splitmix64(chain ^ k);
    words.push_back(static_cast<std::uint32_t>(chain));
    words.push_back(static_cast<std::uint32_t>(chain >> 32));
  }
  words.push_back(static_cast<std::uint32_t>(key_.size()));
  std::seed_seq seq(words.begin(), words.end());
  engine_.seed(seq);
  normal_.reset();
}

RngStream RngStream::substream(std::uint64_t index) const {
  std::vector<std::uint64_t> child = key_;
  child.push_back(index);
  return RngStream(std::move(child));
}

double RngStream::uniform() {
  return std::generate_canonical<double, 53>(engine_);
}

double RngStream::uniform_open() {
  double u;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double RngStream::normal() { return normal_(engine_); }

std::uint64_t RngStream::next_u64() { return engine_(); }

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index over empty range");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

Gaussian::Gaussian(double mean, double var) : mean_(mean), var_(var) {
  if (!(var > 0.0) || !std::isfinite(var)) {
    throw std::invalid_argument("Gaussian variance must be positive");
  }
}

double Gaussian::sample(RngStream& rng) const {
  return mean_ + std::sqrt(var_) * rng.normal();
}

double Gaussian::log_density(double x) const {
  const double r = x - mean_;
  return -0.5 * (kLog2Pi + std::log(var_)) - 0.5 * r * r / var_;
}

SphericalGaussian::SphericalGaussian(Eigen::VectorXd mean, double var)
    : mean_(std::move(mean)), var_(var) {
  if (!(var > 0.0) || !std::isfinite(var)) {
    throw std::invalid_argument("Gaussian variance must be positive");
  }
}

Eigen::VectorXd SphericalGaussian::sample(RngStream& rng) const {
  Eigen::VectorXd x(mean_.size());
  const double sd = std::sqrt(var_);
  for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = mean_[j] + sd * rng.normal();
  return x;
}

double SphericalGaussian::log_density(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const double d = static_cast<double>(mean_.size());
  return -0.5 * d * (kLog2Pi + std::log(var_)) -
         0.5 * (x - mean_).squaredNorm() / var_;
}

void validate_probability_vector(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("empty probability vector");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || p > 1.0) {
      throw std::invalid_argument("probability outside [0, 1]");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kProbSumTolerance) {
    throw std::invalid_argument("probability vector does not sum to 1");
  }
}

Categorical::Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
  validate_probability_vector(probs_);
}

Categorical Categorical::from_log_weights(std::span<const double> log_weights) {
  if (log_weights.empty()) throw std::invalid_argument("empty aggregation");
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  if (m == kNegInf || std::isnan(m)) {
    throw std::domain_error("degenerate conditional");
  }
  std::vector<double> p(log_weights.size());
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::exp(log_weights[k] - m);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return Categorical(std::move(p));
}

std::size_t Categorical::sample(RngStream& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < probs_.size(); ++k) {
    if (probs_[k] > 0.0) last_positive = k;
    acc += probs_[k];
    if (u < acc) return k;
  }
  return last_positive;
}

double Categorical::log_density(std::size_t k) const {
  if (k >= probs_.size()) return kNegInf;
  return std::log(probs_[k]);
}

std::size_t Categorical::mode() const {
  return static_cast<std::size_t>(
      std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

Bernoulli::Bernoulli(double p)
    : Bernoulli(p, std::log1p(-p), std::log(p)) {}

Bernoulli::Bernoulli(double p, double log_p0, double log_p1)
    : p_(p), log_p0_(log_p0), log_p1_(log_p1) {
  if (!(p >= 0.0) || p > 1.0) {
    throw std::invalid_argument("Bernoulli probability outside [0, 1]");
  }
}

Bernoulli Bernoulli::from_log_weights(double log_w0, double log_w1) {
  const double norm = log_add_exp(log_w0, log_w1);
  if (norm == kNegInf || std::isnan(norm)) {
    throw std::domain_error("degenerate conditional");
  }
  return Bernoulli(std::exp(log_w1 - norm), log_w0 - norm, log_w1 - norm);
}

int Bernoulli::sample(RngStream& rng) const {
  return rng.uniform() < p_ ? 1 : 0;
}

double Bernoulli::log_density(int x) const {
  if (x == 1) return log_p1_;
  if (x == 0) return log_p0_;
  return kNegInf;
}

SharedPrecisionColumns::SharedPrecisionColumns(Eigen::MatrixXd means,
                                               const Eigen::MatrixXd& precision)
    : means_(std::move(means)), chol_(precision) {
  if (chol_.info() != Eigen::Success) {
    throw std::domain_error("precision matrix not positive definite");
  }
  half_log_det_precision_ =
      chol_.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd SharedPrecisionColumns::sample(RngStream& rng) const {
  Eigen::MatrixXd eps(means_.rows(), means_.cols());
  for (Eigen::Index c = 0; c < eps.cols(); ++c) {
    for (Eigen::Index r = 0; r < eps.rows(); ++r) eps(r, c) = rng.normal();
  }
  return means_ + chol_.matrixU().solve(eps);
}

double SharedPrecisionColumns::log_density(
    const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  const Eigen::MatrixXd white = chol_.matrixU() * (x - means_);
  const double d = static_cast<double>(means_.rows());
  const double cols = static_cast<double>(means_.cols());
  return cols * (-0.5 * d * kLog2Pi + half_log_det_precision_) -
         0.5 * white.squaredNorm();
}

namespace {

// Upper-tail draw for a > 0 via the inverse survival function.
double sample_positive_tail(double a, double b, RngStream& rng) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double qa = 0.5 * boost::math::erfc(a * kInvSqrt2);
  const double qb = std::isinf(b) ? 0.0 : 0.5 * boost::math::erfc(b * kInvSqrt2);
  if (qa > 0.0 && qa > qb) {
    const double q = qb + (qa - qb) * rng.uniform_open();
    const double x = boost::math::erfc_inv(2.0 * q) / kInvSqrt2;
    return std::clamp(x, a, b);
  }
  // Far tail: exponential rejection sampler.
  for (;;) {
    const double x = a - std::log(rng.uniform_open()) / a;
    if (x > b) continue;
    const double r = x - a;
    if (rng.uniform() < std::exp(-0.5 * r * r)) return x;
  }
}

}  // namespace

double sample_truncated_normal(double sd, double lo, double hi, RngStream& rng) {
  if (!(sd > 0.0)) throw std::invalid_argument("truncated normal needs sd > 0");
  if (!(lo <= hi)) throw std::invalid_argument("empty truncation interval");
  const double a = lo / sd;
  const double b = hi / sd;
  if (std::isinf(a) && std::isinf(b)) return sd * rng.normal();
  if (a == b) return lo;
  if (a >= 0.0) return sd * sample_positive_tail(a, b, rng);
  if (b <= 0.0) return -sd * sample_positive_tail(-b, -a, rng);
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double pa = 0.5 * boost::math::erfc(-a * kInvSqrt2);
  const double pb = 0.5 * boost::math::erfc(-b * kInvSqrt2);
  const double p = pa + (pb - pa) * rng.uniform_open();
  double x;
  if (p < 0.5) {
    x = -boost::math::erfc_inv(2.0 * p) / kInvSqrt2;
  } else {
    x = boost::math::erfc_inv(2.0 * (1.0 - p)) / kInvSqrt2;
  }
  return sd * std::clamp(x, a, b);
}

}  // namespace mlbench
