#pragma once

// Full conditionals of the tempered joint f_beta. The sweeps, the
// consistency registry and the sequential estimators all draw from these.

#include "mlbench/models.hpp"
#include "model_detail.hpp"

namespace mlbench::cond {

// z_i | theta under f_beta.
Categorical clustering_assignment(const ClusteringSpec& spec, const Eigen::MatrixXd& theta,
                                  const Eigen::Ref<const Eigen::RowVectorXd>& row, double beta);

// theta_k | z under f_beta, from the cluster's count and sum.
SphericalGaussian clustering_center(const ClusteringSpec& spec, double count,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& sum,
                                    double beta, double noise_scale);

// z_i | z_{-i} under f_beta with the centers integrated out. The tempered
// likelihood is Gaussian with noise variance noise_var / beta.
Categorical clustering_collapsed_assignment(const ClusteringSpec& spec,
                                            const detail::ClusterStats& stats_without_i,
                                            const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                            double beta = 1.0);

// Rows of U given V, returned as the columns of U^T.
SharedPrecisionColumns lowrank_u(const LowRankSpec& spec, const Eigen::MatrixXd& V,
                                 const Eigen::MatrixXd& Y, double beta, double noise_scale);

// Columns of V given U.
SharedPrecisionColumns lowrank_v(const LowRankSpec& spec, const Eigen::MatrixXd& U,
                                 const Eigen::MatrixXd& Y, double beta);

// z_ik given A and the row residual with attribute k removed.
Bernoulli binary_site(const BinarySpec& spec, int k,
                      const Eigen::Ref<const Eigen::RowVectorXd>& a_k,
                      const Eigen::Ref<const Eigen::RowVectorXd>& resid_without_k,
                      double beta);

// Site conditionals for one row of Z with A integrated out, built from the
// other rows' Z^T Z and Z^T Y. The tempered likelihood is Gaussian with noise
// variance noise_var / beta; at beta = 0 only the prior remains.
class BinaryCollapsedRow {
 public:
  BinaryCollapsedRow(const BinarySpec& spec, const Eigen::MatrixXd& ztz_without_i,
                     const Eigen::MatrixXd& zty_without_i,
                     const Eigen::Ref<const Eigen::RowVectorXd>& row, double beta);

  // z_ik | z_{-ik} given the row's current values.
  Bernoulli site(const Eigen::Ref<const Eigen::RowVectorXd>& z_row, int k) const;

  // log p(y_i | y_{-i}, Z) up to a constant free of the row.
  double score(const Eigen::Ref<const Eigen::RowVectorXd>& z_row) const;

 private:
  const BinarySpec& spec_;
  bool flat_;
  Eigen::MatrixXd P_;  // (Z^T Z + r I)^{-1} over the other rows
  Eigen::MatrixXd W_;  // H H^T with H = P Z^T Y
  Eigen::VectorXd g_;  // H y_i
  double yy_ = 0.0;
  double scale_ = 0.0;
};

// Columns of A given Z.
SharedPrecisionColumns binary_a(const BinarySpec& spec, const Eigen::MatrixXd& Z,
                                const Eigen::MatrixXd& Y, double beta, double noise_scale);

// Prior N(0, var) restricted to an interval.
struct TruncatedGaussian {
  double var;
  double lo;
  double hi;
  double sample(RngStream& rng) const;
  double log_density(double x) const;
};

}  // namespace mlbench::cond
