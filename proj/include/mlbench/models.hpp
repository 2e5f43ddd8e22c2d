#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mlbench/prob_core.hpp"

namespace mlbench {

enum class ModelKind { Clustering, LowRank, Binary };

std::string model_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

// Mixture of spherical Gaussians with fixed mixing weights.
struct ClusteringSpec {
  int N = 50;
  int D = 25;
  int K = 10;
  std::vector<double> mix_probs;  // empty means uniform
  double between_var = 1.0;
  double noise_var = 0.1;
};

// Y = U V + noise with Gaussian factors.
struct LowRankSpec {
  int N = 50;
  int D = 25;
  int K = 5;
  double u_var = 1.0;
  double v_var = 1.0;
  double noise_var = 0.1;
};

// Y = Z A + noise with independent binary attributes.
struct BinarySpec {
  int N = 50;
  int D = 25;
  int K = 10;
  std::vector<double> attr_probs;  // empty means 0.3 for every attribute
  double a_var = 1.0;
  double noise_var = 0.1;
};

using ModelSpec = std::variant<ClusteringSpec, LowRankSpec, BinarySpec>;

struct ClusteringState {
  std::vector<int> z;     // length N
  Eigen::MatrixXd theta;  // K x D
};

struct LowRankState {
  Eigen::MatrixXd U;  // N x K
  Eigen::MatrixXd V;  // K x D
};

struct BinaryState {
  Eigen::MatrixXd Z;  // N x K, entries 0 or 1
  Eigen::MatrixXd A;  // K x D
};

using LatentState = std::variant<ClusteringState, LowRankState, BinaryState>;

template <class Spec> struct StateOf;
template <> struct StateOf<ClusteringSpec> { using type = ClusteringState; };
template <> struct StateOf<LowRankSpec> { using type = LowRankState; };
template <> struct StateOf<BinarySpec> { using type = BinaryState; };

struct Dataset {
  Eigen::MatrixXd Y;  // N x D
  int N() const { return static_cast<int>(Y.rows()); }
  int D() const { return static_cast<int>(Y.cols()); }
  Dataset prefix(int rows) const;
};

// Spec accessors. Specs are normalized on construction through validate().
ModelKind kind(const ModelSpec& spec);
int rows(const ModelSpec& spec);
int dims(const ModelSpec& spec);
int components(const ModelSpec& spec);
ModelSpec with_rows(const ModelSpec& spec, int n);

// Fills defaulted probability vectors and checks every invariant.
void validate(ModelSpec& spec);
ModelSpec validated(ModelSpec spec);
ModelSpec default_spec(ModelKind kind);

// Stable 64-bit hash of all spec fields, used in file provenance headers.
std::uint64_t spec_hash(const ModelSpec& spec);
std::string describe(const ModelSpec& spec);

// Throws "shape mismatch" if the state does not belong to the spec.
void check_state(const ModelSpec& spec, const LatentState& state);
void check_data(const ModelSpec& spec, const Dataset& data);

template <class Spec>
const typename StateOf<Spec>::type& state_as(const Spec&, const LatentState& state) {
  const auto* s = std::get_if<typename StateOf<Spec>::type>(&state);
  if (!s) throw std::invalid_argument("shape mismatch: state belongs to another model");
  return *s;
}
template <class Spec>
typename StateOf<Spec>::type& state_as(const Spec&, LatentState& state) {
  auto* s = std::get_if<typename StateOf<Spec>::type>(&state);
  if (!s) throw std::invalid_argument("shape mismatch: state belongs to another model");
  return *s;
}

struct Simulation {
  LatentState state;
  Dataset data;
};

LatentState sample_prior(const ModelSpec& spec, RngStream& rng);
Dataset sample_data(const ModelSpec& spec, const LatentState& state, RngStream& rng);
Simulation simulate(const ModelSpec& spec, RngStream& rng);

double log_prior(const ModelSpec& spec, const LatentState& state);
double log_likelihood(const ModelSpec& spec, const LatentState& state, const Dataset& data);
double log_joint(const ModelSpec& spec, const LatentState& state, const Dataset& data);
double tempered_log_f(const ModelSpec& spec, const LatentState& state,
                      const Dataset& data, double beta);

// Likelihood with the continuous parameter integrated out: log p(y | z) for
// clustering and binary, log p(Y | V) for low-rank.
double collapsed_log_likelihood(const ModelSpec& spec, const LatentState& state,
                                const Dataset& data);
// log p(z) + log p(y | z) (clustering, binary); log p(V) + log p(Y | V) (low-rank).
double collapsed_log_joint(const ModelSpec& spec, const LatentState& state,
                           const Dataset& data);

// log p(next_row | partial_state, data_prefix). partial_state holds the
// latent rows of the prefix; which parts are used depends on the model.
double predictive_loglik(const ModelSpec& spec, const LatentState& partial_state,
                         const Dataset& data_prefix,
                         const Eigen::Ref<const Eigen::RowVectorXd>& next_row);

inline constexpr int kMaxEnumerationBits = 15;
inline constexpr double kBruteForceLimit = 1e6;
inline constexpr double kQuadratureTolerance = 1e-6;

double brute_force_log_ml(const ModelSpec& spec, const Dataset& data);

// Closed forms shared by several modules.
double cluster_log_marginal(const ClusteringSpec& spec, double count,
                            const Eigen::Ref<const Eigen::RowVectorXd>& sum,
                            double sum_sq, double noise_var);

// Sum over the columns x of X of log N(x; 0, s2 W W^T + noise I), via Woodbury.
double factor_gaussian_log_marginal(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                                    double s2, double noise);

double log_factorial(int k);

}  // namespace mlbench
