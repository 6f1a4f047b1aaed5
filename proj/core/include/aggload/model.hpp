#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "aggload/basis.hpp"
#include "aggload/counts.hpp"

namespace aggload {

// Full parameter set of the aggregated-load model: per-class typology
// coefficients, per-class consumer-level variances, observation noise, and
// the per-transformer true class counts.
struct ModelParams {
  BasisSpec basis;
  Eigen::MatrixXd gammas;          // C x K, row c = coefficients of typology c
  Eigen::VectorXd sigma_gamma_sq;  // length C, consumer coefficient variances
  double sigma_sq = 0.0;           // measurement noise variance
  std::vector<CountVector> counts; // per transformer, each of length C

  int num_classes() const { return static_cast<int>(gammas.rows()); }

  // Shape and range checks; throws InputError on violation.
  void validate() const;

  // Typology curve of class c on the given grid: Phi * gammas.row(c).
  Eigen::VectorXd typology(int c, const DesignMatrix& design) const;
};

// Observations for one transformer: an n x D matrix of aggregated readings
// (rows = grid times, columns = replicate days) plus its reported counts.
struct TransformerData {
  std::string id;
  std::vector<double> times;   // length n, shared by all days
  Eigen::MatrixXd y;           // n x D
  CountVector reported;        // length C
  long num_consumers = 0;      // N_i = sum of reported counts

  int num_times() const { return static_cast<int>(y.rows()); }
  int num_days() const { return static_cast<int>(y.cols()); }
  void validate() const;
};

// Checks that every transformer shares the same time grid and day count and
// the same number of classes; throws InputError otherwise.
void validate_dataset(const std::vector<TransformerData>& data);

// ---- CSV I/O ----
//
// Readings file columns: transformer_id,day,time_index,time_hours,value_kva
// (day and time_index are 1-based).  Reported counts live in a sidecar file
// with columns: transformer_id,class,reported_count (class is 1-based).
// Lines starting with '#' are comments; writers use them to embed the run
// manifest.  Numbers are written with 17 significant digits so a
// save/load round trip reproduces every double exactly.

std::vector<TransformerData> load_data(const std::string& readings_path,
                                       const std::string& counts_path);

void save_data(const std::vector<TransformerData>& data,
               const std::string& readings_path, const std::string& counts_path,
               const std::string& manifest_comment = "");

}  // namespace aggload
