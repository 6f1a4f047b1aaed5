#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

#include "aggload/rng.hpp"

namespace aggload {

// Per-transformer class counts (length C).
using CountVector = std::vector<long>;

// Row-stochastic misreporting matrix: entry (c, j) is the probability that a
// consumer whose true class is c is reported as class j.
class FraudMatrix {
 public:
  // Validates shape, entry range and row sums (within row_sum_tol), then
  // normalizes each row to sum to one exactly up to roundoff.
  explicit FraudMatrix(Eigen::MatrixXd probs, double row_sum_tol = 1e-12);

  static FraudMatrix identity(int num_classes);

  int num_classes() const { return static_cast<int>(probs_.rows()); }
  double operator()(int true_class, int reported_class) const {
    return probs_(true_class, reported_class);
  }
  const Eigen::MatrixXd& probs() const { return probs_; }

  // Column sums S_j = sum_c F(c, j): the unnormalized intensity with which
  // reported class j absorbs consumers.
  Eigen::VectorXd column_sums() const;

  // Conditional true-class distribution within reported class j:
  // p(c | j) = F(c, j) / S_j.  Throws if column j has zero mass.
  Eigen::VectorXd column_probs(int reported_class) const;

 private:
  Eigen::MatrixXd probs_;
};

// Distribution of true-count vectors compatible with one transformer's
// reported counts.  Tables come in two flavors:
//   - Monte Carlo (num_runs > 0): cell_counts[m] runs out of num_runs landed
//     on m, so the stored mass is the exact rational cell_counts[m]/num_runs
//     and h() converts to double on read.
//   - exact (num_runs == 0): exact_probs holds the enumerated distribution.
struct HTable {
  CountVector reported;
  long long num_runs = 0;
  std::uint64_t seed = 0;
  std::map<CountVector, long long> cell_counts;
  std::map<CountVector, double> exact_probs;

  bool is_exact() const { return num_runs == 0; }
  double h(const CountVector& m) const;
  // Count vectors with positive estimated mass, ascending lexicographically.
  std::vector<CountVector> support() const;
};

// Draws the reported counts for one transformer: each of the M_c true-class-c
// consumers lands in a reported class according to row c of the fraud matrix,
// i.e. R = sum_c Multinomial(M_c, F(c, .)).
CountVector sample_reported(const FraudMatrix& fraud, const CountVector& true_counts,
                            RngStream& rng);

// Monte Carlo estimate of H(m) = P{ column sums of the reshuffled table hit m }
// for every m, following the count-likelihood factorization: draw, for each
// reported class j, Multinomial(R_j, column_probs(j)), and tabulate the row
// sums.  Deterministic given (fraud, reported, num_runs, seed): work is split
// into a fixed number of chunks with derived per-chunk streams, so the result
// is identical for any worker count.
HTable estimate_h_table(const FraudMatrix& fraud, const CountVector& reported,
                        long long num_runs, std::uint64_t seed, int num_threads = 1);

// Exact H by dynamic programming over reported classes (distribution of the
// sum of C independent multinomial row-contribution vectors).  Intended for
// small instances; throws InputError when the table enumeration would exceed
// roughly 1e7 states.
HTable exact_h(const FraudMatrix& fraud, const CountVector& reported);

// Exact P{R = reported | M = true_counts} by enumerating every C x C
// contingency table with the given row sums (true counts) and column sums
// (reported counts).  Same size guard as exact_h, on the true-count side.
double exact_report_prob(const FraudMatrix& fraud, const CountVector& true_counts,
                         const CountVector& reported);

// P{R | M} assembled from the count-likelihood factorization:
//   prod_j S_j^{R_j} / R_j!  *  prod_c M_c!  *  H(m).
// h_value is H(true_counts), typically read off an HTable.
double report_prob_from_h(const FraudMatrix& fraud, const CountVector& true_counts,
                          const CountVector& reported, double h_value);

// Candidate true-count vectors for the count update: the support of the
// table ordered by decreasing mass, ties broken lexicographically.
std::vector<CountVector> candidate_counts(const HTable& table);

}  // namespace aggload
