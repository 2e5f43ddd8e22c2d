#pragma once

// Sufficient statistics and closed-form helpers shared by the model,
// transition and estimator sources. Not part of the installed interface.

#include <vector>

#include <Eigen/Dense>

#include "mlbench/models.hpp"

namespace mlbench::detail {

const std::vector<double>& mix_probs(const ClusteringSpec& spec);
const std::vector<double>& attr_probs(const BinarySpec& spec);

struct ClusterStats {
  Eigen::VectorXd count;   // K
  Eigen::MatrixXd sum;     // K x D
  Eigen::VectorXd sum_sq;  // K

  ClusterStats(int K, int D);
  static ClusterStats from(const std::vector<int>& z, const Eigen::MatrixXd& Y, int K);
  void add(int k, const Eigen::Ref<const Eigen::RowVectorXd>& row);
  void remove(int k, const Eigen::Ref<const Eigen::RowVectorXd>& row);
};

// log p(row | members of cluster k) with the center integrated out.
double cluster_predictive(const ClusteringSpec& spec, const ClusterStats& stats, int k,
                          const Eigen::Ref<const Eigen::RowVectorXd>& row,
                          double noise_var);

// Log weights log pi_k + log p(row | cluster k) over all clusters.
std::vector<double> collapsed_assignment_log_weights(
    const ClusteringSpec& spec, const ClusterStats& stats,
    const Eigen::Ref<const Eigen::RowVectorXd>& row, double noise_var);

// Posterior over A given a prefix of rows, A integrated in closed form.
struct BinaryPosterior {
  Eigen::MatrixXd M_inv;  // (Z^T Z + noise/a_var I)^{-1}
  Eigen::MatrixXd mean;   // K x D posterior mean of A
  double noise_var;
};

BinaryPosterior binary_posterior(const BinarySpec& spec, const Eigen::MatrixXd& Z,
                                 const Eigen::MatrixXd& Y);
double binary_row_predictive(const BinaryPosterior& post,
                             const Eigen::Ref<const Eigen::VectorXd>& z,
                             const Eigen::Ref<const Eigen::RowVectorXd>& row);
double binary_row_log_prior(const BinarySpec& spec, const Eigen::Ref<const Eigen::VectorXd>& z);

// Refuses enumeration beyond kMaxEnumerationBits attributes.
void check_enumerable(int K);
Eigen::VectorXd bits_to_vector(unsigned bits, int K);

// Log weights over all 2^K attribute rows of log p(z) + log p(row | z, prefix).
std::vector<double> binary_row_log_weights(const BinarySpec& spec,
                                           const BinaryPosterior& post,
                                           const Eigen::Ref<const Eigen::RowVectorXd>& row);

// log p(row | V) with the row's factor integrated out.
double lowrank_row_marginal(const LowRankSpec& spec, const Eigen::MatrixXd& V,
                            const Eigen::Ref<const Eigen::RowVectorXd>& row);

// Sum over columns of log N(x; 0, s2 W W^T + noise I) by a dense Cholesky of
// the full covariance. Used only by the oracles.
double dense_gaussian_log_marginal(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                                   double s2, double noise);

}  // namespace mlbench::detail
