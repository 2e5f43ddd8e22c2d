#include "mlbench/models.hpp"

#include <cstdio>
#include <functional>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "model_detail.hpp"

namespace mlbench {

namespace {

template <class... Fs> struct Overload : Fs... { using Fs::operator()...; };
template <class... Fs> Overload(Fs...) -> Overload<Fs...>;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be positive and finite");
  }
}

void require_dims(int N, int D, int K) {
  if (N < 0) throw std::invalid_argument("N must be non-negative");
  if (D < 1) throw std::invalid_argument("D must be at least 1");
  if (K < 1) throw std::invalid_argument("K must be at least 1");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double gaussian_sum_log_density(const Eigen::MatrixXd& resid, double var) {
  const double n = static_cast<double>(resid.size());
  return -0.5 * n * (kLog2Pi + std::log(var)) - 0.5 * resid.squaredNorm() / var;
}

double prior_gaussian_block(const Eigen::MatrixXd& x, double var) {
  return gaussian_sum_log_density(x, var);
}

}  // namespace

std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Clustering: return "clustering";
    case ModelKind::LowRank: return "lowrank";
    case ModelKind::Binary: return "binary";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "clustering") return ModelKind::Clustering;
  if (name == "lowrank" || name == "low-rank") return ModelKind::LowRank;
  if (name == "binary") return ModelKind::Binary;
  throw std::invalid_argument("unknown model '" + name + "'");
}

Dataset Dataset::prefix(int n) const {
  if (n < 0 || n > N()) throw std::out_of_range("prefix length out of range");
  return Dataset{Y.topRows(n)};
}

ModelKind kind(const ModelSpec& spec) {
  return std::visit(Overload{
      [](const ClusteringSpec&) { return ModelKind::Clustering; },
      [](const LowRankSpec&) { return ModelKind::LowRank; },
      [](const BinarySpec&) { return ModelKind::Binary; }}, spec);
}

int rows(const ModelSpec& spec) {
  return std::visit([](const auto& s) { return s.N; }, spec);
}
int dims(const ModelSpec& spec) {
  return std::visit([](const auto& s) { return s.D; }, spec);
}
int components(const ModelSpec& spec) {
  return std::visit([](const auto& s) { return s.K; }, spec);
}

ModelSpec with_rows(const ModelSpec& spec, int n) {
  ModelSpec out = spec;
  std::visit([n](auto& s) { s.N = n; }, out);
  return out;
}

void validate(ModelSpec& spec) {
  std::visit(Overload{
      [](ClusteringSpec& s) {
        require_dims(s.N, s.D, s.K);
        require_positive(s.between_var, "between_var");
        require_positive(s.noise_var, "noise_var");
        if (s.mix_probs.empty()) s.mix_probs.assign(s.K, 1.0 / s.K);
        if (static_cast<int>(s.mix_probs.size()) != s.K) {
          throw std::invalid_argument("mix_probs must have K entries");
        }
        validate_probability_vector(s.mix_probs);
      },
      [](LowRankSpec& s) {
        require_dims(s.N, s.D, s.K);
        require_positive(s.u_var, "u_var");
        require_positive(s.v_var, "v_var");
        require_positive(s.noise_var, "noise_var");
        if (s.K > std::min(s.N, s.D)) {
          throw std::invalid_argument("low-rank model needs K <= min(N, D)");
        }
      },
      [](BinarySpec& s) {
        require_dims(s.N, s.D, s.K);
        require_positive(s.a_var, "a_var");
        require_positive(s.noise_var, "noise_var");
        if (s.attr_probs.empty()) s.attr_probs.assign(s.K, 0.3);
        if (static_cast<int>(s.attr_probs.size()) != s.K) {
          throw std::invalid_argument("attr_probs must have K entries");
        }
        for (double p : s.attr_probs) {
          if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("attribute probability outside [0, 1]");
          }
        }
      }}, spec);
}

ModelSpec validated(ModelSpec spec) {
  validate(spec);
  return spec;
}

ModelSpec default_spec(ModelKind k) {
  switch (k) {
    case ModelKind::Clustering: return validated(ClusteringSpec{});
    case ModelKind::LowRank: return validated(LowRankSpec{});
    case ModelKind::Binary: return validated(BinarySpec{});
  }
  throw std::invalid_argument("unknown model kind");
}

std::string describe(const ModelSpec& spec) {
  std::ostringstream os;
  std::visit(Overload{
      [&](const ClusteringSpec& s) {
        os << "clustering N=" << s.N << " D=" << s.D << " K=" << s.K
           << " between_var=" << fmt(s.between_var) << " noise_var=" << fmt(s.noise_var)
           << " mix_probs=";
        for (double p : s.mix_probs) os << fmt(p) << ';';
      },
      [&](const LowRankSpec& s) {
        os << "lowrank N=" << s.N << " D=" << s.D << " K=" << s.K
           << " u_var=" << fmt(s.u_var) << " v_var=" << fmt(s.v_var)
           << " noise_var=" << fmt(s.noise_var);
      },
      [&](const BinarySpec& s) {
        os << "binary N=" << s.N << " D=" << s.D << " K=" << s.K
           << " a_var=" << fmt(s.a_var) << " noise_var=" << fmt(s.noise_var)
           << " attr_probs=";
        for (double p : s.attr_probs) os << fmt(p) << ';';
      }}, spec);
  return os.str();
}

std::uint64_t spec_hash(const ModelSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : describe(spec)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void check_state(const ModelSpec& spec, const LatentState& state) {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("shape mismatch: " + what);
  };
  std::visit([&](const auto& s) {
    using S = std::decay_t<decltype(s)>;
    const auto& x = state_as(s, state);
    if constexpr (std::is_same_v<S, ClusteringSpec>) {
      if (static_cast<int>(x.z.size()) != s.N) fail("assignments length");
      if (x.theta.rows() != s.K || x.theta.cols() != s.D) fail("theta shape");
      for (int zi : x.z) {
        if (zi < 0 || zi >= s.K) fail("assignment out of range");
      }
    } else if constexpr (std::is_same_v<S, LowRankSpec>) {
      if (x.U.rows() != s.N || x.U.cols() != s.K) fail("U shape");
      if (x.V.rows() != s.K || x.V.cols() != s.D) fail("V shape");
    } else {
      if (x.Z.rows() != s.N || x.Z.cols() != s.K) fail("Z shape");
      if (x.A.rows() != s.K || x.A.cols() != s.D) fail("A shape");
      for (Eigen::Index i = 0; i < x.Z.size(); ++i) {
        const double v = x.Z.data()[i];
        if (v != 0.0 && v != 1.0) fail("binary entry not in {0,1}");
      }
    }
  }, spec);
}

void check_data(const ModelSpec& spec, const Dataset& data) {
  if (data.N() != rows(spec) || data.D() != dims(spec)) {
    throw std::invalid_argument("shape mismatch: dataset is " + std::to_string(data.N()) +
                                "x" + std::to_string(data.D()));
  }
  if (!data.Y.allFinite()) throw std::invalid_argument("dataset has non-finite entries");
}

LatentState sample_prior(const ModelSpec& spec, RngStream& rng) {
  return std::visit(Overload{
      [&](const ClusteringSpec& s) -> LatentState {
        ClusteringState x;
        const double sd = std::sqrt(s.between_var);
        x.theta.resize(s.K, s.D);
        for (int k = 0; k < s.K; ++k)
          for (int j = 0; j < s.D; ++j) x.theta(k, j) = sd * rng.normal();
        const Categorical pi(detail::mix_probs(s));
        x.z.resize(s.N);
        for (int i = 0; i < s.N; ++i) x.z[i] = static_cast<int>(pi.sample(rng));
        return x;
      },
      [&](const LowRankSpec& s) -> LatentState {
        LowRankState x;
        const double su = std::sqrt(s.u_var), sv = std::sqrt(s.v_var);
        x.V.resize(s.K, s.D);
        for (int k = 0; k < s.K; ++k)
          for (int j = 0; j < s.D; ++j) x.V(k, j) = sv * rng.normal();
        x.U.resize(s.N, s.K);
        for (int i = 0; i < s.N; ++i)
          for (int k = 0; k < s.K; ++k) x.U(i, k) = su * rng.normal();
        return x;
      },
      [&](const BinarySpec& s) -> LatentState {
        BinaryState x;
        const double sa = std::sqrt(s.a_var);
        x.A.resize(s.K, s.D);
        for (int k = 0; k < s.K; ++k)
          for (int j = 0; j < s.D; ++j) x.A(k, j) = sa * rng.normal();
        const auto& p = detail::attr_probs(s);
        x.Z.resize(s.N, s.K);
        for (int i = 0; i < s.N; ++i)
          for (int k = 0; k < s.K; ++k) x.Z(i, k) = rng.uniform() < p[k] ? 1.0 : 0.0;
        return x;
      }}, spec);
}

namespace {

Eigen::MatrixXd model_mean(const ModelSpec& spec, const LatentState& state) {
  return std::visit(Overload{
      [&](const ClusteringSpec& s) -> Eigen::MatrixXd {
        const auto& x = state_as(s, state);
        Eigen::MatrixXd m(s.N, s.D);
        for (int i = 0; i < s.N; ++i) m.row(i) = x.theta.row(x.z[i]);
        return m;
      },
      [&](const LowRankSpec& s) -> Eigen::MatrixXd {
        const auto& x = state_as(s, state);
        return x.U * x.V;
      },
      [&](const BinarySpec& s) -> Eigen::MatrixXd {
        const auto& x = state_as(s, state);
        return x.Z * x.A;
      }}, spec);
}

double noise_var(const ModelSpec& spec) {
  return std::visit([](const auto& s) { return s.noise_var; }, spec);
}

}  // namespace

Dataset sample_data(const ModelSpec& spec, const LatentState& state, RngStream& rng) {
  check_state(spec, state);
  Eigen::MatrixXd Y = model_mean(spec, state);
  const double sd = std::sqrt(noise_var(spec));
  for (Eigen::Index i = 0; i < Y.rows(); ++i)
    for (Eigen::Index j = 0; j < Y.cols(); ++j) Y(i, j) += sd * rng.normal();
  return Dataset{std::move(Y)};
}

Simulation simulate(const ModelSpec& spec, RngStream& rng) {
  ModelSpec checked = validated(spec);
  LatentState x = sample_prior(checked, rng);
  Dataset y = sample_data(checked, x, rng);
  return {std::move(x), std::move(y)};
}

double log_prior(const ModelSpec& spec, const LatentState& state) {
  check_state(spec, state);
  return std::visit(Overload{
      [&](const ClusteringSpec& s) {
        const auto& x = state_as(s, state);
        const auto& pi = detail::mix_probs(s);
        double lp = prior_gaussian_block(x.theta, s.between_var);
        for (int zi : x.z) lp += std::log(pi[zi]);
        return lp;
      },
      [&](const LowRankSpec& s) {
        const auto& x = state_as(s, state);
        return prior_gaussian_block(x.U, s.u_var) + prior_gaussian_block(x.V, s.v_var);
      },
      [&](const BinarySpec& s) {
        const auto& x = state_as(s, state);
        double lp = prior_gaussian_block(x.A, s.a_var);
        for (int i = 0; i < s.N; ++i) lp += detail::binary_row_log_prior(s, x.Z.row(i).transpose());
        return lp;
      }}, spec);
}

double log_likelihood(const ModelSpec& spec, const LatentState& state, const Dataset& data) {
  check_state(spec, state);
  check_data(spec, data);
  return gaussian_sum_log_density(data.Y - model_mean(spec, state), noise_var(spec));
}

double log_joint(const ModelSpec& spec, const LatentState& state, const Dataset& data) {
  return log_prior(spec, state) + log_likelihood(spec, state, data);
}

double tempered_log_f(const ModelSpec& spec, const LatentState& state, const Dataset& data,
                      double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta out of range");
  const double lp = log_prior(spec, state);
  if (beta == 0.0) return lp;
  return lp + beta * log_likelihood(spec, state, data);
}

double collapsed_log_likelihood(const ModelSpec& spec, const LatentState& state,
                                const Dataset& data) {
  check_state(spec, state);
  check_data(spec, data);
  return std::visit(Overload{
      [&](const ClusteringSpec& s) {
        const auto& x = state_as(s, state);
        const auto stats = detail::ClusterStats::from(x.z, data.Y, s.K);
        double total = 0.0;
        for (int k = 0; k < s.K; ++k) {
          total += cluster_log_marginal(s, stats.count[k], stats.sum.row(k),
                                        stats.sum_sq[k], s.noise_var);
        }
        return total;
      },
      [&](const LowRankSpec& s) {
        const auto& x = state_as(s, state);
        return factor_gaussian_log_marginal(data.Y.transpose(), x.V.transpose(), s.u_var,
                                            s.noise_var);
      },
      [&](const BinarySpec& s) {
        const auto& x = state_as(s, state);
        return factor_gaussian_log_marginal(data.Y, x.Z, s.a_var, s.noise_var);
      }}, spec);
}

double collapsed_log_joint(const ModelSpec& spec, const LatentState& state,
                           const Dataset& data) {
  const double ll = collapsed_log_likelihood(spec, state, data);
  return std::visit(Overload{
      [&](const ClusteringSpec& s) {
        const auto& pi = detail::mix_probs(s);
        double lp = 0.0;
        for (int zi : state_as(s, state).z) lp += std::log(pi[zi]);
        return lp + ll;
      },
      [&](const LowRankSpec& s) {
        return prior_gaussian_block(state_as(s, state).V, s.v_var) + ll;
      },
      [&](const BinarySpec& s) {
        const auto& x = state_as(s, state);
        double lp = 0.0;
        for (int i = 0; i < s.N; ++i) lp += detail::binary_row_log_prior(s, x.Z.row(i).transpose());
        return lp + ll;
      }}, spec);
}

double predictive_loglik(const ModelSpec& spec, const LatentState& partial_state,
                         const Dataset& data_prefix,
                         const Eigen::Ref<const Eigen::RowVectorXd>& next_row) {
  const ModelSpec prefix_spec = with_rows(spec, data_prefix.N());
  check_state(prefix_spec, partial_state);
  check_data(prefix_spec, data_prefix);
  if (next_row.size() != dims(spec)) throw std::invalid_argument("shape mismatch: next row");
  return std::visit(Overload{
      [&](const ClusteringSpec& s) {
        const auto& x = state_as(s, partial_state);
        const auto stats = detail::ClusterStats::from(x.z, data_prefix.Y, s.K);
        const auto w = detail::collapsed_assignment_log_weights(s, stats, next_row, s.noise_var);
        return log_sum_exp(w);
      },
      [&](const LowRankSpec& s) {
        return detail::lowrank_row_marginal(s, state_as(s, partial_state).V, next_row);
      },
      [&](const BinarySpec& s) {
        detail::check_enumerable(s.K);
        const auto post = detail::binary_posterior(s, state_as(s, partial_state).Z, data_prefix.Y);
        return log_sum_exp(detail::binary_row_log_weights(s, post, next_row));
      }}, prefix_spec);
}

double cluster_log_marginal(const ClusteringSpec& spec, double count,
                            const Eigen::Ref<const Eigen::RowVectorXd>& sum, double sum_sq,
                            double noise) {
  const double D = static_cast<double>(sum.size());
  const double s2 = spec.between_var;
  return -0.5 * count * D * (kLog2Pi + std::log(noise)) -
         0.5 * D * std::log1p(count * s2 / noise) -
         0.5 / noise * (sum_sq - s2 * sum.squaredNorm() / (noise + count * s2));
}

double factor_gaussian_log_marginal(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                                    double s2, double noise) {
  const double n = static_cast<double>(X.rows());
  const double m = static_cast<double>(X.cols());
  const Eigen::Index K = W.cols();
  Eigen::MatrixXd M = W.transpose() * W;
  M.diagonal().array() += noise / s2;
  const Eigen::LLT<Eigen::MatrixXd> chol(M);
  const double log_det_M = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
  const double log_det_C =
      n * std::log(noise) + static_cast<double>(K) * std::log(s2 / noise) + log_det_M;
  const Eigen::MatrixXd B = W.transpose() * X;
  const double quad = (X.squaredNorm() - (B.array() * chol.solve(B).array()).sum()) / noise;
  return -0.5 * n * m * kLog2Pi - 0.5 * m * log_det_C - 0.5 * quad;
}

double log_factorial(int k) { return std::lgamma(static_cast<double>(k) + 1.0); }

namespace {

[[noreturn]] void refuse(const std::string& what) {
  throw std::invalid_argument("instance too large: " + what);
}

double brute_force_clustering(const ClusteringSpec& s, const Dataset& data) {
  const double configs = std::pow(static_cast<double>(s.K), s.N);
  if (configs > kBruteForceLimit) {
    refuse("K^N = " + fmt(configs) + " configurations exceeds " + fmt(kBruteForceLimit));
  }
  const auto& pi = detail::mix_probs(s);
  std::vector<int> z(s.N, 0);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(configs));
  for (;;) {
    double lp = 0.0;
    for (int zi : z) lp += std::log(pi[zi]);
    if (lp > kNegInf) {
      const auto stats = detail::ClusterStats::from(z, data.Y, s.K);
      for (int k = 0; k < s.K; ++k) {
        lp += cluster_log_marginal(s, stats.count[k], stats.sum.row(k), stats.sum_sq[k],
                                   s.noise_var);
      }
    }
    terms.push_back(lp);
    int pos = 0;
    while (pos < s.N && ++z[pos] == s.K) z[pos++] = 0;
    if (pos == s.N) break;
  }
  return log_sum_exp(terms);
}

double brute_force_binary(const BinarySpec& s, const Dataset& data) {
  const double bits = static_cast<double>(s.N) * s.K;
  if (std::pow(2.0, bits) > kBruteForceLimit) {
    refuse("2^(N*K) = 2^" + fmt(bits) + " configurations exceeds " + fmt(kBruteForceLimit));
  }
  const auto total = static_cast<std::uint64_t>(1) << static_cast<int>(bits);
  std::vector<double> terms;
  terms.reserve(total);
  Eigen::MatrixXd Z(s.N, s.K);
  for (std::uint64_t c = 0; c < total; ++c) {
    for (int i = 0; i < s.N; ++i)
      for (int k = 0; k < s.K; ++k) Z(i, k) = static_cast<double>((c >> (i * s.K + k)) & 1U);
    double lp = 0.0;
    for (int i = 0; i < s.N; ++i) lp += detail::binary_row_log_prior(s, Z.row(i).transpose());
    if (lp > kNegInf) lp += detail::dense_gaussian_log_marginal(data.Y, Z, s.a_var, s.noise_var);
    terms.push_back(lp);
  }
  return log_sum_exp(terms);
}

// Adaptive Gauss-Kronrod over R^m, nested one coordinate at a time.
double integrate_real_space(const std::function<double(const Eigen::VectorXd&)>& log_f,
                            int m, double shift) {
  using boost::math::quadrature::gauss_kronrod;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd point(m);
  std::function<double(int)> level = [&](int d) -> double {
    auto f = [&, d](double t) {
      point[d] = t;
      if (d + 1 == m) return std::exp(log_f(point) - shift);
      return level(d + 1);
    };
    const double tol = d == 0 ? kQuadratureTolerance * 1e-2 : kQuadratureTolerance * 1e-4;
    return gauss_kronrod<double, 61>::integrate(f, -kInf, kInf, 20, tol);
  };
  return level(0);
}

double brute_force_lowrank(const LowRankSpec& s, const Dataset& data) {
  if (s.K != 1 || s.N + s.D > 4) {
    refuse("quadrature oracle needs K = 1 and N + D <= 4, got K = " + std::to_string(s.K) +
           ", N + D = " + std::to_string(s.N + s.D));
  }
  // Integrate the larger factor in closed form and the smaller by quadrature.
  const bool over_v = s.D <= s.N;
  const int m = over_v ? s.D : s.N;
  const double outer_var = over_v ? s.v_var : s.u_var;
  const double inner_var = over_v ? s.u_var : s.v_var;
  const Eigen::MatrixXd X = over_v ? Eigen::MatrixXd(data.Y.transpose()) : data.Y;
  auto log_f = [&](const Eigen::VectorXd& w) {
    return -0.5 * m * (kLog2Pi + std::log(outer_var)) - 0.5 * w.squaredNorm() / outer_var +
           detail::dense_gaussian_log_marginal(X, w, inner_var, s.noise_var);
  };
  // Shift by the best point of a coarse grid so the integrand stays O(1).
  double shift = kNegInf;
  const int grid = 41;
  const double half_width = 6.0 * std::sqrt(outer_var);
  Eigen::VectorXd w(m);
  const int total = static_cast<int>(std::pow(grid, m));
  for (int c = 0; c < total; ++c) {
    int rem = c;
    for (int d = 0; d < m; ++d) {
      w[d] = -half_width + 2.0 * half_width * (rem % grid) / (grid - 1);
      rem /= grid;
    }
    shift = std::max(shift, log_f(w));
  }
  return shift + std::log(integrate_real_space(log_f, m, shift));
}

}  // namespace

double brute_force_log_ml(const ModelSpec& spec, const Dataset& data) {
  const ModelSpec s = validated(spec);
  check_data(s, data);
  if (data.N() == 0) return 0.0;
  return std::visit(Overload{
      [&](const ClusteringSpec& c) { return brute_force_clustering(c, data); },
      [&](const LowRankSpec& l) { return brute_force_lowrank(l, data); },
      [&](const BinarySpec& b) { return brute_force_binary(b, data); }}, s);
}

namespace detail {

const std::vector<double>& mix_probs(const ClusteringSpec& spec) {
  if (static_cast<int>(spec.mix_probs.size()) != spec.K) {
    throw std::invalid_argument("clustering spec not validated");
  }
  return spec.mix_probs;
}

const std::vector<double>& attr_probs(const BinarySpec& spec) {
  if (static_cast<int>(spec.attr_probs.size()) != spec.K) {
    throw std::invalid_argument("binary spec not validated");
  }
  return spec.attr_probs;
}

ClusterStats::ClusterStats(int K, int D)
    : count(Eigen::VectorXd::Zero(K)), sum(Eigen::MatrixXd::Zero(K, D)),
      sum_sq(Eigen::VectorXd::Zero(K)) {}

ClusterStats ClusterStats::from(const std::vector<int>& z, const Eigen::MatrixXd& Y, int K) {
  ClusterStats st(K, static_cast<int>(Y.cols()));
  for (std::size_t i = 0; i < z.size(); ++i) st.add(z[i], Y.row(static_cast<Eigen::Index>(i)));
  return st;
}

void ClusterStats::add(int k, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  count[k] += 1.0;
  sum.row(k) += row;
  sum_sq[k] += row.squaredNorm();
}

void ClusterStats::remove(int k, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  count[k] -= 1.0;
  sum.row(k) -= row;
  sum_sq[k] -= row.squaredNorm();
  if (count[k] == 0.0) {
    sum.row(k).setZero();
    sum_sq[k] = 0.0;
  }
}

double cluster_predictive(const ClusteringSpec& spec, const ClusterStats& stats, int k,
                          const Eigen::Ref<const Eigen::RowVectorXd>& row, double noise) {
  const double precision = 1.0 / spec.between_var + stats.count[k] / noise;
  const double var = 1.0 / precision + noise;
  const double D = static_cast<double>(row.size());
  const double scale = 1.0 / (noise * precision);
  const double r2 = (row - scale * stats.sum.row(k)).squaredNorm();
  return -0.5 * D * (kLog2Pi + std::log(var)) - 0.5 * r2 / var;
}

std::vector<double> collapsed_assignment_log_weights(
    const ClusteringSpec& spec, const ClusterStats& stats,
    const Eigen::Ref<const Eigen::RowVectorXd>& row, double noise) {
  const auto& pi = mix_probs(spec);
  std::vector<double> w(spec.K);
  for (int k = 0; k < spec.K; ++k) {
    w[k] = pi[k] > 0.0 ? std::log(pi[k]) + cluster_predictive(spec, stats, k, row, noise)
                       : kNegInf;
  }
  return w;
}

BinaryPosterior binary_posterior(const BinarySpec& spec, const Eigen::MatrixXd& Z,
                                 const Eigen::MatrixXd& Y) {
  Eigen::MatrixXd M = Z.transpose() * Z;
  M.diagonal().array() += spec.noise_var / spec.a_var;
  const Eigen::LLT<Eigen::MatrixXd> chol(M);
  BinaryPosterior post;
  post.M_inv = chol.solve(Eigen::MatrixXd::Identity(spec.K, spec.K));
  post.mean = chol.solve(Z.transpose() * Y);
  post.noise_var = spec.noise_var;
  return post;
}

double binary_row_predictive(const BinaryPosterior& post,
                             const Eigen::Ref<const Eigen::VectorXd>& z,
                             const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double var = post.noise_var * (1.0 + z.dot(post.M_inv * z));
  const double D = static_cast<double>(row.size());
  const double r2 = (row - z.transpose() * post.mean).squaredNorm();
  return -0.5 * D * (kLog2Pi + std::log(var)) - 0.5 * r2 / var;
}

double binary_row_log_prior(const BinarySpec& spec, const Eigen::Ref<const Eigen::VectorXd>& z) {
  const auto& p = attr_probs(spec);
  double lp = 0.0;
  for (int k = 0; k < spec.K; ++k) lp += z[k] != 0.0 ? std::log(p[k]) : std::log1p(-p[k]);
  return lp;
}

void check_enumerable(int K) {
  if (K > kMaxEnumerationBits) {
    throw std::invalid_argument("enumeration too large: 2^" + std::to_string(K) +
                                " attribute configurations");
  }
}

Eigen::VectorXd bits_to_vector(unsigned bits, int K) {
  Eigen::VectorXd z(K);
  for (int k = 0; k < K; ++k) z[k] = static_cast<double>((bits >> k) & 1U);
  return z;
}

std::vector<double> binary_row_log_weights(const BinarySpec& spec, const BinaryPosterior& post,
                                           const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  check_enumerable(spec.K);
  const unsigned total = 1U << spec.K;
  std::vector<double> w(total);
  for (unsigned c = 0; c < total; ++c) {
    const Eigen::VectorXd z = bits_to_vector(c, spec.K);
    const double lp = binary_row_log_prior(spec, z);
    w[c] = lp > kNegInf ? lp + binary_row_predictive(post, z, row) : kNegInf;
  }
  return w;
}

double lowrank_row_marginal(const LowRankSpec& spec, const Eigen::MatrixXd& V,
                            const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  return factor_gaussian_log_marginal(row.transpose(), V.transpose(), spec.u_var,
                                      spec.noise_var);
}

double dense_gaussian_log_marginal(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                                   double s2, double noise) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd C = s2 * W * W.transpose();
  C.diagonal().array() += noise;
  const Eigen::LLT<Eigen::MatrixXd> chol(C);
  const double log_det = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
  const Eigen::MatrixXd white = chol.matrixL().solve(X);
  return -0.5 * static_cast<double>(n * X.cols()) * kLog2Pi -
         0.5 * static_cast<double>(X.cols()) * log_det - 0.5 * white.squaredNorm();
}

}  // namespace detail

}  // namespace mlbench
