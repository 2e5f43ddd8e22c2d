#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace mlbench {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Probability vectors must sum to one within this absolute tolerance.
inline constexpr double kProbSumTolerance = 1e-12;

// Log-domain scalar. NaN and +inf are rejected; -inf is weight zero.
class LogWeight {
 public:
  LogWeight() = default;
  explicit LogWeight(double value);

  double value() const { return value_; }
  bool is_zero() const { return value_ == kNegInf; }

  LogWeight& operator+=(double log_increment);
  friend LogWeight operator+(LogWeight w, double log_increment) {
    w += log_increment;
    return w;
  }
  friend bool operator==(const LogWeight&, const LogWeight&) = default;

 private:
  double value_ = 0.0;
};

double log_sum_exp(std::span<const double> values);
double log_mean_exp(std::span<const double> values);
double log_harmonic_mean_exp(std::span<const double> values);
double log_add_exp(double a, double b);

// Deterministic random stream keyed by (seed, stream_id) plus an optional
// path of substream indices. Equal keys give identical draw sequences.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return key_.front(); }
  std::uint64_t stream_id() const { return key_[1]; }
  const std::vector<std::uint64_t>& key() const { return key_; }

  // Independent child stream; does not advance this stream.
  RngStream substream(std::uint64_t index) const;

  double uniform();           // [0, 1)
  double uniform_open();      // (0, 1)
  double normal();            // standard normal
  std::uint64_t next_u64();
  std::size_t uniform_index(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  explicit RngStream(std::vector<std::uint64_t> key);
  void reseed();

  std::vector<std::uint64_t> key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

class Gaussian {
 public:
  Gaussian(double mean, double var);

  double mean() const { return mean_; }
  double var() const { return var_; }
  double sample(RngStream& rng) const;
  double log_density(double x) const;

 private:
  double mean_;
  double var_;
};

// Isotropic Gaussian: every coordinate independent with a common variance.
class SphericalGaussian {
 public:
  SphericalGaussian(Eigen::VectorXd mean, double var);

  const Eigen::VectorXd& mean() const { return mean_; }
  double var() const { return var_; }
  Eigen::Index dim() const { return mean_.size(); }
  Eigen::VectorXd sample(RngStream& rng) const;
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  Eigen::VectorXd mean_;
  double var_;
};

class Categorical {
 public:
  explicit Categorical(std::vector<double> probs);

  // Normalizes unnormalized log weights. All -inf raises "degenerate conditional".
  static Categorical from_log_weights(std::span<const double> log_weights);

  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  std::size_t sample(RngStream& rng) const;
  double log_density(std::size_t k) const;
  std::size_t mode() const;

 private:
  std::vector<double> probs_;
};

class Bernoulli {
 public:
  explicit Bernoulli(double p);
  static Bernoulli from_log_weights(double log_w0, double log_w1);

  double p() const { return p_; }
  int sample(RngStream& rng) const;
  double log_density(int x) const;

 private:
  Bernoulli(double p, double log_p0, double log_p1);
  double p_;
  double log_p0_;
  double log_p1_;
};

// Independent columns x_c ~ N(mean_c, P^{-1}) sharing one precision matrix.
class SharedPrecisionColumns {
 public:
  SharedPrecisionColumns(Eigen::MatrixXd means, const Eigen::MatrixXd& precision);

  const Eigen::MatrixXd& means() const { return means_; }
  Eigen::MatrixXd sample(RngStream& rng) const;
  double log_density(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

 private:
  Eigen::MatrixXd means_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  double half_log_det_precision_;
};

// Draw from N(0, sd^2) restricted to [lo, hi].
double sample_truncated_normal(double sd, double lo, double hi, RngStream& rng);

void validate_probability_vector(std::span<const double> probs);

}  // namespace mlbench
