#include "aggload/likelihood.hpp"

#include <cmath>
#include <sstream>

#include "aggload/errors.hpp"

namespace aggload {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_factorial(long n) { return std::lgamma(static_cast<double>(n) + 1.0); }

// sum_c m_c sigma_gamma_c^2: the consumer-noise multiplier of Psi Psi'.
double coeff_scale(const ModelParams& params, const CountVector& m) {
  if (m.size() != static_cast<std::size_t>(params.num_classes()))
    throw InputError("likelihood: count vector length does not match class count");
  double a = 0.0;
  for (int c = 0; c < params.num_classes(); ++c) {
    if (m[c] < 0) throw InputError("likelihood: negative count");
    a += static_cast<double>(m[c]) * params.sigma_gamma_sq(c);
  }
  return a;
}

// Phi sum_c m_c gamma_c on the transformer's grid.
Eigen::VectorXd aggregate_mean(const ModelParams& params, const DesignMatrix& design,
                               const CountVector& m) {
  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(params.basis.num_basis);
  for (int c = 0; c < params.num_classes(); ++c)
    coeff += static_cast<double>(m[c]) * params.gammas.row(c).transpose();
  return design.values * coeff;
}

// log P{R_i | M_i = m} from the factorized count model, given H(m) off the
// table.  -inf when the mass vanishes.
double count_logprob(const FraudMatrix& fraud, const CountVector& m,
                     const CountVector& reported, double h_value) {
  if (h_value <= 0.0) return kNegInf;
  double lp = std::log(h_value);
  Eigen::VectorXd s = fraud.column_sums();
  for (std::size_t j = 0; j < reported.size(); ++j) {
    if (reported[j] == 0) continue;
    if (s(static_cast<Eigen::Index>(j)) <= 0.0) return kNegInf;
    lp += static_cast<double>(reported[j]) * std::log(s(static_cast<Eigen::Index>(j))) -
          log_factorial(reported[j]);
  }
  for (long v : m) lp += log_factorial(v);
  return lp;
}

}  // namespace

// ---- eigendecomposition cache ----

EigenCache build_eigen_cache(const DesignMatrix& design) {
  const Eigen::MatrixXd gram = design.values * design.values.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigendecomposition of Psi Psi' failed");

  EigenCache cache;
  const Eigen::Index n = gram.rows();
  cache.q.resize(n, n);
  cache.eigenvalues.resize(n);
  // Descending order, spectrum clamped at zero: Psi Psi' is positive
  // semidefinite, so tiny negative eigenvalues are pure roundoff and
  // clamping keeps every Delta_i = a Gamma + sigma^2 strictly positive.
  for (Eigen::Index r = 0; r < n; ++r) {
    cache.q.row(r) = solver.eigenvectors().col(n - 1 - r).transpose();
    cache.eigenvalues(r) = std::max(solver.eigenvalues()(n - 1 - r), 0.0);
  }
  return cache;
}

// ---- Gaussian core, direct path ----

double gauss_neg2ll(const ModelParams& params, const TransformerData& data,
                    const CountVector& m) {
  params.validate();
  DesignMatrix design = eval_basis(params.basis, data.times);
  const double a = coeff_scale(params, m);
  const Eigen::Index n = data.y.rows();

  Eigen::MatrixXd lambda = a * (design.values * design.values.transpose());
  lambda.diagonal().array() += params.sigma_sq;

  Eigen::LLT<Eigen::MatrixXd> llt(lambda);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lambda);
    std::ostringstream msg;
    msg << "covariance not positive definite (sigma_sq = " << params.sigma_sq
        << ", eigenvalues in [" << es.eigenvalues().minCoeff() << ", "
        << es.eigenvalues().maxCoeff() << "])";
    throw NumericalError(msg.str());
  }

  double logdet = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) logdet += 2.0 * std::log(llt.matrixL()(r, r));

  const Eigen::VectorXd mu = aggregate_mean(params, design, m);
  double quad = 0.0;
  for (Eigen::Index d = 0; d < data.y.cols(); ++d) {
    Eigen::VectorXd resid = data.y.col(d) - mu;
    quad += resid.dot(llt.solve(resid));
  }
  return static_cast<double>(data.y.cols()) * logdet + quad;
}

// ---- Gaussian core, eigenvalue path ----

double gauss_neg2ll_eigen(const ModelParams& params, const TransformerData& data,
                          const CountVector& m, const EigenCache& cache) {
  const double a = coeff_scale(params, m);
  const Eigen::Index n = data.y.rows();
  if (cache.q.rows() != n)
    throw InputError("likelihood: eigen cache size does not match data grid");

  // Rotated spectrum: Lambda = Q' diag(delta) Q with delta = a Gamma + sigma^2.
  Eigen::ArrayXd delta = (a * cache.eigenvalues).array() + params.sigma_sq;
  if (!(delta.minCoeff() > 0.0)) {
    std::ostringstream msg;
    msg << "covariance not positive definite (sigma_sq = " << params.sigma_sq
        << ", rotated eigenvalues in [" << delta.minCoeff() << ", "
        << delta.maxCoeff() << "])";
    throw NumericalError(msg.str());
  }
  const double logdet = delta.log().sum();

  DesignMatrix design = eval_basis(params.basis, data.times);
  const Eigen::VectorXd mu = aggregate_mean(params, design, m);
  double quad = 0.0;
  for (Eigen::Index d = 0; d < data.y.cols(); ++d) {
    Eigen::ArrayXd rotated = (cache.q * (data.y.col(d) - mu)).array();
    quad += (rotated.square() / delta).sum();
  }
  return static_cast<double>(data.y.cols()) * logdet + quad;
}

// ---- assembled objectives ----

double gauss_logdens(const ModelParams& params, const TransformerData& data,
                     const CountVector& m, const EigenCache* cache) {
  const double core = cache != nullptr ? gauss_neg2ll_eigen(params, data, m, *cache)
                                       : gauss_neg2ll(params, data, m);
  const double n_obs = static_cast<double>(data.y.rows() * data.y.cols());
  return -0.5 * core - 0.5 * n_obs * kLog2Pi;
}

double lstar(const ModelParams& params, const TransformerData& data,
             const HTable& table, const CountVector& m, const EigenCache* cache) {
  const double h = table.h(m);
  if (h <= 0.0) return kNegInf;
  const double core = cache != nullptr ? gauss_neg2ll_eigen(params, data, m, *cache)
                                       : gauss_neg2ll(params, data, m);
  double lp = -0.5 * core + std::log(h);
  for (long v : m) lp += log_factorial(v);
  return lp;
}

LikelihoodBreakdown total_loglik(const ModelParams& params,
                                 const std::vector<TransformerData>& data,
                                 const std::vector<HTable>& tables,
                                 const FraudMatrix& fraud, const EigenCache* cache) {
  params.validate();
  if (params.counts.size() != data.size())
    throw InputError("total_loglik: params carry counts for a different transformer set");
  if (tables.size() != data.size())
    throw InputError("total_loglik: one H table per transformer required");

  LikelihoodBreakdown out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.gauss += gauss_logdens(params, data[i], params.counts[i], cache);
    out.counts += count_logprob(fraud, params.counts[i], data[i].reported,
                                tables[i].h(params.counts[i]));
  }
  out.total = out.gauss + out.counts;
  return out;
}

}  // namespace aggload
