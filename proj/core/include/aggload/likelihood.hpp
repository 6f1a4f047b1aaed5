#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "aggload/basis.hpp"
#include "aggload/counts.hpp"
#include "aggload/model.hpp"

namespace aggload {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Eigendecomposition of Psi Psi' (the basis Gram matrix on the observation
// grid), factored once per fit.  With it, every per-transformer covariance
//   Lambda_i = a_i Psi Psi' + sigma^2 I,   a_i = sum_c M_ci sigma_gamma_c^2
// shares the eigenvectors and only the spectrum a_i * eigenvalues + sigma^2
// changes, so determinants and quadratic forms cost O(n) per day with no
// further matrix factorization.
struct EigenCache {
  Eigen::MatrixXd q;            // n x n, rows are eigenvectors (Q Q' = I)
  Eigen::VectorXd eigenvalues;  // length n, nonnegative, descending
};

EigenCache build_eigen_cache(const DesignMatrix& design);

// -2 log Gaussian likelihood core for one transformer, dropping the
// n D log(2 pi) constant:
//   D log|Lambda_i| + sum_d (y_d - mu_i)' Lambda_i^{-1} (y_d - mu_i),
// with mu_i = Phi sum_c m_c gamma_c.  Replicate days enter as iid columns.
//
// The direct version assembles Lambda_i and factors it (Cholesky); it exists
// as the plain-linear-algebra reference.  Throws NumericalError, naming
// sigma_sq and the extreme eigenvalues, if Lambda_i is not positive definite.
double gauss_neg2ll(const ModelParams& params, const TransformerData& data,
                    const CountVector& m);

// Same value through the cached eigendecomposition; no matrix factorization
// after the cache is built.  Agrees with gauss_neg2ll to tight absolute
// tolerance.
double gauss_neg2ll_eigen(const ModelParams& params, const TransformerData& data,
                          const CountVector& m, const EigenCache& cache);

// log f(Y_i | m): the full Gaussian log density (constant included).
double gauss_logdens(const ModelParams& params, const TransformerData& data,
                     const CountVector& m, const EigenCache* cache = nullptr);

// Count-profile objective for one transformer: the parts of the joint log
// likelihood that vary with the true-count vector m,
//   -D/2 log|Lambda_i| - 1/2 sum_d quad_d + sum_c log m_c! + log H_i(m).
// Returns -inf (never NaN) when the table gives H_i(m) = 0.
double lstar(const ModelParams& params, const TransformerData& data,
             const HTable& table, const CountVector& m,
             const EigenCache* cache = nullptr);

// Joint log likelihood split into its two ingredients.
struct LikelihoodBreakdown {
  double gauss = 0.0;   // sum_i log f(Y_i | M_i)
  double counts = 0.0;  // sum_i log P{R_i | M_i}
  double total = 0.0;
};

// Evaluates the joint log likelihood at params.counts, reading H off the
// frozen per-transformer tables (indexed like `data`).  -inf, with the same
// breakdown fields, when some transformer's counts fall outside its table
// support.
LikelihoodBreakdown total_loglik(const ModelParams& params,
                                 const std::vector<TransformerData>& data,
                                 const std::vector<HTable>& tables,
                                 const FraudMatrix& fraud,
                                 const EigenCache* cache = nullptr);

}  // namespace aggload
