#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "aggload/basis.hpp"
#include "aggload/counts.hpp"
#include "aggload/model.hpp"
#include "aggload/rng.hpp"

namespace aggload {

// Complete description of a synthetic study: model parameters, population
// layout, misreporting, and the master seed.
struct SimScenario {
  int case_id = 0;                 // 1..4 for the canned cases, 0 for custom
  int num_transformers = 0;
  int num_days = 1;
  BasisSpec basis;
  Eigen::MatrixXd gammas;          // C x K
  Eigen::VectorXd sigma_gamma_sq;  // length C
  double sigma_sq = 0.0;
  Eigen::MatrixXd fraud;           // C x C, row-stochastic
  std::vector<CountVector> true_counts;      // per transformer
  std::vector<CountVector> reported_counts;  // per transformer; filled by finalize
  std::vector<double> times;       // observation grid; default grid if empty
  std::uint64_t seed = 1;

  ModelParams params() const;      // basis/gammas/variances/true counts
  void validate() const;
};

// 96 quarter-hour interval midpoints: 0.125, 0.375, ..., 23.875.
std::vector<double> default_observation_grid();

// Stand-in typology coefficients (2 x 9, cubic basis on [0, 24]): row 0 is a
// residential-shaped profile with morning and evening bumps, row 1 a
// commercial-shaped profile peaking in the late afternoon.
Eigen::MatrixXd default_base_gammas();

// Canned scenarios 1-4 on five transformers of 75 consumers each.
// Cases 1 and 2 rescale each class profile to [0,1] and shift it up by 2, so
// both classes live on a common scale; cases 3 and 4 keep the raw profiles
// and instead scale the consumer variances by the squared profile ranges.
// Odd cases use a balanced class split, even cases an unbalanced 90/10-ish
// split.  Reported counts are pinned, fixed draws of the misreporting model.
SimScenario build_case(int case_id, const Eigen::MatrixXd& base_gammas,
                       std::uint64_t seed, int num_days = 5);

// Fills defaulted fields in place: the observation grid when `times` is
// empty, and one misreporting draw per transformer when `reported_counts` is
// empty (derived from the scenario seed, so it is a fixed property of the
// scenario, not of any particular dataset).  Then validates.
void finalize_scenario(SimScenario& scenario);

// One consumer curve of class c on the grid: Phi (gamma_c + delta) with
// delta ~ N(0, sigma_gamma_sq[c] I).  No measurement noise.
Eigen::VectorXd simulate_consumer(const ModelParams& params, int c,
                                  const DesignMatrix& design, RngStream& rng);

// One transformer: per day, sums fresh consumer curves for every consumer in
// every class (counts taken from params.counts[index]) and adds N(0,
// sigma_sq) noise per reading.  Reported counts are drawn with
// sample_reported unless pinned_reported is given; either way the readings
// use the same draws.
TransformerData simulate_transformer(const ModelParams& params, const FraudMatrix& fraud,
                                     int index, int num_days, const DesignMatrix& design,
                                     RngStream& rng,
                                     const CountVector* pinned_reported = nullptr);

// One full dataset for the scenario.  Each (dataset_index, transformer)
// pair gets its own derived stream, so datasets can be generated in any
// order or in parallel and still come out identical.
std::vector<TransformerData> simulate_dataset(const SimScenario& scenario,
                                              int dataset_index = 0);

}  // namespace aggload
