#include "aggload/simulate.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "aggload/errors.hpp"

namespace aggload {

namespace {

// Stream tags for derive(): keep dataset draws, reported-count draws and
// anything else on non-overlapping substreams of the scenario seed.
constexpr std::uint64_t kTagDataset = 0x64617461;   // "data"
constexpr std::uint64_t kTagReported = 0x72657030;  // "rep0"

}  // namespace

ModelParams SimScenario::params() const {
  ModelParams p;
  p.basis = basis;
  p.gammas = gammas;
  p.sigma_gamma_sq = sigma_gamma_sq;
  p.sigma_sq = sigma_sq;
  p.counts = true_counts;
  return p;
}

void SimScenario::validate() const {
  ModelParams p = params();
  p.validate();
  if (num_transformers <= 0) throw InputError("scenario: num_transformers must be positive");
  if (num_days <= 0) throw InputError("scenario: num_days must be positive");
  if (static_cast<int>(true_counts.size()) != num_transformers)
    throw InputError("scenario: true_counts must list every transformer");
  FraudMatrix f(fraud);  // validates shape and row sums
  if (f.num_classes() != p.num_classes())
    throw InputError("scenario: fraud matrix class count does not match gammas");
  if (!reported_counts.empty()) {
    if (static_cast<int>(reported_counts.size()) != num_transformers)
      throw InputError("scenario: reported_counts must list every transformer");
    for (int i = 0; i < num_transformers; ++i) {
      long sum_m = 0, sum_r = 0;
      for (long v : true_counts[i]) sum_m += v;
      for (long v : reported_counts[i]) {
        if (v < 0) throw InputError("scenario: negative reported count");
        sum_r += v;
      }
      if (static_cast<int>(reported_counts[i].size()) != p.num_classes())
        throw InputError("scenario: reported count vector has wrong class count");
      if (sum_m != sum_r) {
        std::ostringstream msg;
        msg << "scenario: transformer " << i + 1 << " reports " << sum_r
            << " consumers but has " << sum_m;
        throw InputError(msg.str());
      }
    }
  }
  if (!times.empty()) {
    for (double t : times)
      if (!(t >= basis.t_lo && t <= basis.t_hi))
        throw InputError("scenario: observation grid leaves the basis domain");
  }
}

std::vector<double> default_observation_grid() {
  std::vector<double> grid(96);
  for (int j = 0; j < 96; ++j) grid[j] = 0.25 * j + 0.125;
  return grid;
}

Eigen::MatrixXd default_base_gammas() {
  Eigen::MatrixXd g(2, 9);
  // Residential-ish: small morning shoulder, evening peak around hour 20.
  g.row(0) << 0.45, 0.35, 0.35, 0.55, 0.75, 0.55, 1.30, 0.75, 0.50;
  // Commercial-ish: business-hours hump peaking in the late afternoon.
  g.row(1) << 0.80, 0.30, 0.20, 2.00, 4.20, 5.60, 6.20, 2.20, 1.00;
  return g;
}

SimScenario build_case(int case_id, const Eigen::MatrixXd& base_gammas,
                       std::uint64_t seed, int num_days) {
  if (case_id < 1 || case_id > 4) throw InputError("case id must be 1..4");
  if (base_gammas.rows() != 2) throw InputError("canned cases need 2 classes");

  SimScenario s;
  s.case_id = case_id;
  s.num_transformers = 5;
  s.num_days = num_days;
  s.seed = seed;
  s.basis = BasisSpec{3, static_cast<int>(base_gammas.cols()), 0.0, 24.0};
  s.sigma_sq = 3.5;
  s.fraud.resize(2, 2);
  s.fraud << 0.98, 0.02, 0.05, 0.95;
  s.times = default_observation_grid();

  // Per-class profile ranges drive the two scale treatments.
  Eigen::VectorXd lo = base_gammas.rowwise().minCoeff();
  Eigen::VectorXd hi = base_gammas.rowwise().maxCoeff();
  const bool rescaled = case_id <= 2;
  s.gammas = base_gammas;
  s.sigma_gamma_sq.resize(2);
  for (int c = 0; c < 2; ++c) {
    double range = hi(c) - lo(c);
    if (range <= 0.0) throw InputError("base profile has zero range");
    double raw_var = c == 0 ? 0.03 : 0.06;
    if (rescaled) {
      s.gammas.row(c) = (base_gammas.row(c).array() - lo(c)) / range + 2.0;
      s.sigma_gamma_sq(c) = raw_var;
    } else {
      s.sigma_gamma_sq(c) = raw_var * range * range;
    }
  }

  const bool balanced = case_id % 2 == 1;
  std::vector<long> class1 = balanced ? std::vector<long>{45, 29, 61, 24, 12}
                                      : std::vector<long>{66, 65, 69, 62, 72};
  std::vector<long> reported1 = balanced ? std::vector<long>{45, 32, 60, 28, 16}
                                         : std::vector<long>{65, 66, 68, 63, 71};
  for (int i = 0; i < 5; ++i) {
    s.true_counts.push_back({class1[i], 75 - class1[i]});
    s.reported_counts.push_back({reported1[i], 75 - reported1[i]});
  }
  s.validate();
  return s;
}

void finalize_scenario(SimScenario& scenario) {
  if (scenario.times.empty()) scenario.times = default_observation_grid();
  if (scenario.reported_counts.empty()) {
    FraudMatrix fraud(scenario.fraud);
    RngStream rng = RngStream(scenario.seed).derive(kTagReported);
    for (int i = 0; i < scenario.num_transformers; ++i) {
      RngStream sub = rng.derive(static_cast<std::uint64_t>(i));
      scenario.reported_counts.push_back(
          sample_reported(fraud, scenario.true_counts[i], sub));
    }
  }
  scenario.validate();
}

Eigen::VectorXd simulate_consumer(const ModelParams& params, int c,
                                  const DesignMatrix& design, RngStream& rng) {
  if (c < 0 || c >= params.num_classes())
    throw InputError("simulate_consumer: class out of range");
  const int k = params.basis.num_basis;
  double sd = std::sqrt(params.sigma_gamma_sq(c));
  Eigen::VectorXd coeff = params.gammas.row(c).transpose();
  for (int j = 0; j < k; ++j) coeff(j) += sd * rng.normal();
  return design.values * coeff;
}

TransformerData simulate_transformer(const ModelParams& params, const FraudMatrix& fraud,
                                     int index, int num_days, const DesignMatrix& design,
                                     RngStream& rng, const CountVector* pinned_reported) {
  params.validate();
  if (index < 0 || index >= static_cast<int>(params.counts.size()))
    throw InputError("simulate_transformer: transformer index out of range");
  if (num_days <= 0) throw InputError("simulate_transformer: num_days must be positive");
  const CountVector& m = params.counts[index];
  const int c_total = params.num_classes();
  const int k = params.basis.num_basis;
  const int n = static_cast<int>(design.times.size());
  const double noise_sd = std::sqrt(params.sigma_sq);

  TransformerData t;
  t.id = std::to_string(index + 1);
  t.times = design.times;
  t.y.resize(n, num_days);

  // Aggregation happens in coefficient space: the sum of the consumers'
  // B-spline curves is the curve of the summed coefficients.  Draw order per
  // day is classes outermost, consumers within class, one K-vector each,
  // then the day's measurement noise.
  Eigen::VectorXd coeff_sum(k);
  for (int d = 0; d < num_days; ++d) {
    coeff_sum.setZero();
    for (int c = 0; c < c_total; ++c) {
      double sd = std::sqrt(params.sigma_gamma_sq(c));
      Eigen::VectorXd class_coeff = params.gammas.row(c).transpose();
      for (long l = 0; l < m[c]; ++l)
        for (int j = 0; j < k; ++j) coeff_sum(j) += class_coeff(j) + sd * rng.normal();
    }
    t.y.col(d) = design.values * coeff_sum;
    for (int r = 0; r < n; ++r) t.y(r, d) += noise_sd * rng.normal();
  }

  if (pinned_reported != nullptr) {
    t.reported = *pinned_reported;
  } else {
    t.reported = sample_reported(fraud, m, rng);
  }
  t.num_consumers = 0;
  for (long v : t.reported) t.num_consumers += v;
  return t;
}

std::vector<TransformerData> simulate_dataset(const SimScenario& scenario,
                                              int dataset_index) {
  SimScenario s = scenario;
  finalize_scenario(s);
  if (dataset_index < 0) throw InputError("simulate_dataset: dataset index must be >= 0");

  ModelParams params = s.params();
  FraudMatrix fraud(s.fraud);
  DesignMatrix design = eval_basis(s.basis, s.times);
  RngStream root =
      RngStream(s.seed).derive(kTagDataset).derive(static_cast<std::uint64_t>(dataset_index));

  std::vector<TransformerData> out;
  out.reserve(s.num_transformers);
  for (int i = 0; i < s.num_transformers; ++i) {
    RngStream rng = root.derive(static_cast<std::uint64_t>(i));
    out.push_back(simulate_transformer(params, fraud, i, s.num_days, design, rng,
                                       &s.reported_counts[i]));
  }
  return out;
}

}  // namespace aggload
