#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aggload/basis.hpp"
#include "aggload/counts.hpp"
#include "aggload/likelihood.hpp"
#include "aggload/model.hpp"

namespace aggload {

struct FitConfig {
  BasisSpec basis;
  int max_outer_iters = 200;
  double rel_tol = 1e-6;        // relative log-likelihood change across a cycle
  double inner_tol = 1e-8;      // scalar search / simplex tolerance
  double sigma_sq_floor = 1e-8; // lower bracket for the noise variance
  long long h_runs = 100000;    // Monte Carlo runs per H table
  std::uint64_t seed = 1;       // master seed for the H tables
  bool exact_tables = false;    // enumerate H exactly instead (small instances)
  int num_threads = 1;
  Eigen::VectorXd variance_ratios;     // per-class ratios to the last class; empty = equal
  std::optional<ModelParams> initial;  // warm start; counts fall back to reported
};

struct TraceEntry {
  int iteration = 0;   // 0 for the initial point
  std::string step;    // "init", "gammas", "sigma_sq", "sigma_gamma", "counts"
  double loglik = 0.0;
};

struct FitResult {
  ModelParams params;
  bool converged = false;
  int iterations = 0;
  LikelihoodBreakdown breakdown;
  std::vector<TraceEntry> trace;  // joint log likelihood, nondecreasing
  std::vector<HTable> tables;     // frozen per-transformer H tables
  // Final count-profile objective per transformer over its candidate set.
  std::vector<std::map<CountVector, double>> lstar_tables;
  std::vector<std::string> warnings;
  std::vector<std::string> transformer_ids;
  std::vector<double> times;        // observation grid
  Eigen::MatrixXd observed_mean;    // n x I, per-transformer mean over days
};

// ---- initial values ----

// Pooled residual variance of per-day ordinary least squares fits on the
// basis design: sum of squared residuals over all transformers and days,
// divided by I * D * (n - K).  Needs n > K grid points.
double init_sigma_sq(const std::vector<TransformerData>& data, const BasisSpec& basis);

// Method-of-moments start for the consumer variances.  With replicate days
// the within-grid-point variance across days estimates
// (sum_c M_c sigma_gamma_c^2) diag(Psi Psi') + sigma^2; with a single day the
// squared residuals from the current mean play that role.  Solves for the
// last class's variance given the ratios and clamps at zero.
Eigen::VectorXd init_sigma_gamma(const std::vector<TransformerData>& data,
                                 const BasisSpec& basis,
                                 const std::vector<CountVector>& counts,
                                 const Eigen::MatrixXd& gammas, double sigma_sq,
                                 const Eigen::VectorXd& variance_ratios);

// ---- coordinate updates ----
// Each update minimizes the Gaussian core
//   l1 = sum_i [ D log|Lambda_i| + sum_d resid' Lambda_i^{-1} resid ]
// in its own block with the others held fixed, and never returns a point
// worse than the one it was given.

// Exact generalized-least-squares solution of the typology coefficients.
// Throws NumericalError when the normal matrix is singular (for instance
// when every transformer has proportional count vectors).
Eigen::MatrixXd update_gammas(const std::vector<TransformerData>& data,
                              const BasisSpec& basis,
                              const std::vector<CountVector>& counts,
                              const Eigen::VectorXd& sigma_gamma_sq, double sigma_sq);

// Bracketed scalar search on [floor, 10 x current], widening the bracket up
// to three times when the minimizer presses the upper edge (then keeping the
// edge and recording a warning in *warning if given).
double update_sigma_sq(const std::vector<TransformerData>& data, const BasisSpec& basis,
                       const std::vector<CountVector>& counts,
                       const Eigen::MatrixXd& gammas,
                       const Eigen::VectorXd& sigma_gamma_sq, double sigma_sq,
                       const FitConfig& config, std::string* warning = nullptr);

// Simplex search over the C consumer variances with projection onto the
// nonnegative orthant, restarted once from the perturbed optimum; zero
// components are legitimate boundary solutions.
Eigen::VectorXd update_sigma_gamma(const std::vector<TransformerData>& data,
                                   const BasisSpec& basis,
                                   const std::vector<CountVector>& counts,
                                   const Eigen::MatrixXd& gammas, double sigma_sq,
                                   const Eigen::VectorXd& sigma_gamma_sq,
                                   const FitConfig& config);

// Per-transformer scan of the H-table candidates by the count-profile
// objective; ties go to the candidate closest to the reported counts in L1,
// then lexicographically smallest.
std::vector<CountVector> update_counts(const ModelParams& params,
                                       const std::vector<TransformerData>& data,
                                       const std::vector<HTable>& tables);

// ---- driver ----

// Block-coordinate ascent on the joint log likelihood: freeze one H table
// per transformer, start the counts at the reported counts, then alternate
// (gammas, sigma_sq, sigma_gamma) and the count scan until the relative
// log-likelihood change drops under rel_tol with the counts unchanged over a
// full cycle.
FitResult fit(const std::vector<TransformerData>& data, const FraudMatrix& fraud,
              const FitConfig& config);

}  // namespace aggload
