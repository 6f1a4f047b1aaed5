// Acceptance gate: one line of PASS/FAIL per numbered criterion.
// Usage: aggload_acceptance [criterion ...]   (default: all)

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "aggload/basis.hpp"
#include "aggload/counts.hpp"
#include "aggload/errors.hpp"
#include "aggload/fit.hpp"
#include "aggload/likelihood.hpp"
#include "aggload/model.hpp"
#include "aggload/rng.hpp"
#include "aggload/simulate.hpp"

using namespace aggload;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  return static_cast<int>(std::min(hw, 8u));
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

void enumerate_compositions(long total, int parts, CountVector& cur,
                            std::vector<CountVector>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (long v = 0; v <= total; ++v) {
    cur.push_back(v);
    enumerate_compositions(total - v, parts - 1, cur, out);
    cur.pop_back();
  }
}

std::vector<CountVector> compositions(long total, int parts) {
  std::vector<CountVector> out;
  CountVector cur;
  enumerate_compositions(total, parts, cur, out);
  return out;
}

struct Line {
  bool pass = false;
  std::string details;
};

// ---- criterion 1: Monte Carlo count table at the published operating point ----

Line criterion_1() {
  Eigen::MatrixXd f(2, 2);
  f << 0.98, 0.02, 0.05, 0.95;
  FraudMatrix fraud(f);
  const CountVector reported{32, 43};
  const double want[13] = {0.000, 0.002, 0.007, 0.027, 0.075, 0.166, 0.256,
                           0.255, 0.143, 0.051, 0.014, 0.003, 0.000};

  Clock::time_point start = Clock::now();
  HTable table = estimate_h_table(fraud, reported, 100000, 1, worker_count());
  double elapsed = seconds_since(start);

  double worst = 0.0;
  int worst_m = -1;
  for (int m1 = 25; m1 <= 37; ++m1) {
    double got = table.h({m1, 75 - m1});
    double err = std::abs(got - want[m1 - 25]);
    if (err > worst) {
      worst = err;
      worst_m = m1;
    }
  }

  Line out;
  out.pass = worst <= 0.01 && elapsed < 5.0;
  out.details = "max cell deviation " + fmt(worst) + " at m1=" +
                std::to_string(worst_m) + " (limit 0.01), " + fmt(elapsed, 2) +
                "s (limit 5s)";
  return out;
}

// ---- criterion 2: factorized count probability equals the direct one ----

Line criterion_2() {
  Clock::time_point start = Clock::now();
  RngStream rng(2);
  double worst_identity = 0.0, worst_mass = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int c = 2 + static_cast<int>(rng.uniform() * 2.0);  // 2 or 3
    Eigen::MatrixXd f(c, c);
    for (int i = 0; i < c; ++i) {
      double row = 0.0;
      for (int j = 0; j < c; ++j) {
        f(i, j) = 0.05 + rng.uniform();
        row += f(i, j);
      }
      f.row(i) /= row;
    }
    FraudMatrix fraud(f);

    const long total = 1 + static_cast<long>(rng.uniform() * 8.0);  // 1..8
    CountVector truth(c, 0);
    for (long unit = 0; unit < total; ++unit)
      ++truth[static_cast<std::size_t>(rng.uniform() * c)];

    double mass = 0.0;
    for (const CountVector& rep : compositions(total, c)) {
      double direct = exact_report_prob(fraud, truth, rep);
      mass += direct;
      HTable table = exact_h(fraud, rep);
      double via = report_prob_from_h(fraud, truth, rep, table.h(truth));
      worst_identity = std::max(worst_identity, std::abs(via - direct));
    }
    worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
  }
  double elapsed = seconds_since(start);

  Line out;
  out.pass = worst_identity <= 1e-12 && worst_mass <= 1e-10 && elapsed < 30.0;
  out.details = "200 instances: max identity gap " + fmt(worst_identity) +
                " (limit 1e-12), max total-mass gap " + fmt(worst_mass) +
                " (limit 1e-10), " + fmt(elapsed, 2) + "s (limit 30s)";
  return out;
}

// ---- criterion 3: direct and eigendecomposition likelihood paths agree ----

Line criterion_3() {
  RngStream rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 8 + static_cast<int>(rng.uniform() * 41.0);   // 8..48
    const int k = 4 + static_cast<int>(rng.uniform() * 6.0);    // 4..9
    const int c = 1 + static_cast<int>(rng.uniform() * 3.0);    // 1..3
    const int days = 1 + static_cast<int>(rng.uniform() * 5.0); // 1..5

    ModelParams p;
    p.basis = BasisSpec{3, k, 0.0, 24.0};
    std::vector<double> times(n);
    for (int j = 0; j < n; ++j) times[j] = 24.0 * (j + rng.uniform()) / n;
    p.gammas.resize(c, k);
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < k; ++j) p.gammas(i, j) = 2.0 * rng.normal();
    p.sigma_gamma_sq.resize(c);
    for (int i = 0; i < c; ++i) p.sigma_gamma_sq(i) = 1.5 * rng.uniform();
    p.sigma_sq = 0.5 + 1.5 * rng.uniform();
    CountVector m(c);
    for (int i = 0; i < c; ++i) m[i] = 1 + static_cast<long>(rng.uniform() * 6.0);
    p.counts = {m};

    TransformerData t;
    t.id = "t";
    t.times = times;
    t.y.resize(n, days);
    for (int d = 0; d < days; ++d)
      for (int j = 0; j < n; ++j) t.y(j, d) = 5.0 * rng.normal();
    t.reported = m;
    t.num_consumers = 0;
    for (long v : m) t.num_consumers += v;

    double direct = gauss_neg2ll(p, t, m);
    EigenCache cache = build_eigen_cache(eval_basis(p.basis, times));
    double fast = gauss_neg2ll_eigen(p, t, m, cache);
    worst = std::max(worst, std::abs(direct - fast));
  }

  Line out;
  out.pass = worst <= 1e-8;
  out.details = "100 instances: max |direct - eigen| " + fmt(worst) + " (limit 1e-8)";
  return out;
}

// ---- criterion 4: the typology update is a minimizer along every axis ----

Line criterion_4() {
  RngStream rng(4);
  double worst_drop = 0.0;
  int done = 0, attempts = 0;
  while (done < 100 && attempts < 1000) {
    ++attempts;
    const int n = 16 + static_cast<int>(rng.uniform() * 17.0);  // 16..32
    const int k = 4 + static_cast<int>(rng.uniform() * 3.0);    // 4..6
    const int c = 1 + static_cast<int>(rng.uniform() * 3.0);    // 1..3
    const int days = 1 + static_cast<int>(rng.uniform() * 3.0); // 1..3
    const int transformers = 2 + static_cast<int>(rng.uniform() * 3.0);

    BasisSpec basis{3, k, 0.0, 24.0};
    std::vector<double> times(n);
    for (int j = 0; j < n; ++j) times[j] = 24.0 * (j + 0.5) / n;

    std::vector<TransformerData> data;
    std::vector<CountVector> counts;
    for (int i = 0; i < transformers; ++i) {
      CountVector m(c);
      long total = 0;
      for (int cc = 0; cc < c; ++cc) {
        m[cc] = 1 + static_cast<long>(rng.uniform() * 6.0);
        total += m[cc];
      }
      TransformerData t;
      t.id = std::to_string(i + 1);
      t.times = times;
      t.y.resize(n, days);
      for (int d = 0; d < days; ++d)
        for (int r = 0; r < n; ++r) t.y(r, d) = 5.0 + 1.5 * rng.normal();
      t.reported = m;
      t.num_consumers = total;
      data.push_back(std::move(t));
      counts.push_back(m);
    }
    Eigen::VectorXd sg(c);
    for (int cc = 0; cc < c; ++cc) sg(cc) = 0.8 * rng.uniform();
    const double sigma_sq = 0.5 + 1.5 * rng.uniform();

    Eigen::MatrixXd opt;
    try {
      opt = update_gammas(data, basis, counts, sg, sigma_sq);
    } catch (const NumericalError&) {
      continue;  // proportional counts drawn; try a fresh instance
    }

    ModelParams p;
    p.basis = basis;
    p.gammas = opt;
    p.sigma_gamma_sq = sg;
    p.sigma_sq = sigma_sq;
    auto l1 = [&](const Eigen::MatrixXd& g) {
      ModelParams q = p;
      q.gammas = g;
      double out = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i)
        out += gauss_neg2ll(q, data[i], counts[i]);
      return out;
    };
    const double at_opt = l1(opt);
    for (int cc = 0; cc < c; ++cc) {
      for (int j = 0; j < k; ++j) {
        for (double step : {1e-4, -1e-4}) {
          Eigen::MatrixXd probe = opt;
          probe(cc, j) += step;
          worst_drop = std::max(worst_drop, at_opt - l1(probe));
        }
      }
    }
    ++done;
  }

  Line out;
  out.pass = done == 100 && worst_drop <= 1e-10;
  out.details = std::to_string(done) + " instances: worst probe improvement " +
                fmt(worst_drop) + " (limit 1e-10)";
  return out;
}

// ---- criteria 5-7: one shared batch of twenty case-1 fits ----

struct BatchRun {
  bool clean = false;
  std::string error;
  FitResult result;
};

struct Batch {
  SimScenario scenario;
  std::vector<BatchRun> runs;
  double elapsed = 0.0;
};

Batch run_case1_batch() {
  Batch batch;
  batch.scenario = build_case(1, default_base_gammas(), 1, 5);
  finalize_scenario(batch.scenario);

  FitConfig config;
  config.basis = batch.scenario.basis;
  config.num_threads = worker_count();

  Clock::time_point start = Clock::now();
  for (int r = 0; r < 20; ++r) {
    BatchRun run;
    try {
      std::vector<TransformerData> data = simulate_dataset(batch.scenario, r);
      FitConfig cfg = config;
      cfg.seed = 1 + static_cast<std::uint64_t>(r);
      run.result = fit(data, FraudMatrix(batch.scenario.fraud), cfg);
      run.clean = true;
    } catch (const std::exception& e) {
      run.error = e.what();
    }
    batch.runs.push_back(std::move(run));
  }
  batch.elapsed = seconds_since(start);
  return batch;
}

Line criterion_5(const Batch& batch) {
  int converged = 0;
  double worst_dip = 0.0;
  int max_iters = 0;
  std::string first_error;
  for (const BatchRun& run : batch.runs) {
    if (!run.clean) {
      if (first_error.empty()) first_error = run.error;
      continue;
    }
    if (run.result.converged) ++converged;
    max_iters = std::max(max_iters, run.result.iterations);
    for (std::size_t i = 1; i < run.result.trace.size(); ++i)
      worst_dip = std::max(worst_dip, run.result.trace[i - 1].loglik -
                                          run.result.trace[i].loglik);
  }

  Line out;
  out.pass = first_error.empty() && converged == 20 && worst_dip <= 1e-8;
  out.details = std::to_string(converged) + "/20 converged (max " +
                std::to_string(max_iters) + " iters), worst trace dip " +
                fmt(worst_dip) + " (limit 1e-8), batch " + fmt(batch.elapsed, 3) +
                "s (target 300s)";
  if (!first_error.empty()) out.details += ", error: " + first_error;
  return out;
}

Line criterion_6(const Batch& batch) {
  std::map<long, int> histogram;
  long lo = 1000, hi = -1000;
  int usable = 0;
  for (const BatchRun& run : batch.runs) {
    if (!run.clean) continue;
    long m1 = run.result.params.counts[1][0];  // transformer 2, class 1
    ++histogram[m1];
    lo = std::min(lo, m1);
    hi = std::max(hi, m1);
    ++usable;
  }
  long mode = -1;
  int mode_count = 0;
  for (const auto& [value, count] : histogram)
    if (count > mode_count) {
      mode = value;
      mode_count = count;
    }

  Line out;
  out.pass = usable == 20 && mode >= 30 && mode <= 32 && lo >= 28 && hi <= 33;
  out.details = "transformer 2 (truth 29, reported 32): mode " + std::to_string(mode) +
                " (" + std::to_string(mode_count) + "/20, limit {30,31,32}), range [" +
                std::to_string(lo) + "," + std::to_string(hi) + "] (limit [28,33])";
  return out;
}

Line criterion_7(const Batch& batch) {
  const SimScenario& s = batch.scenario;
  DesignMatrix design = eval_basis(s.basis, s.times);
  const int c_total = static_cast<int>(s.gammas.rows());

  // Interior 80% of the time domain.
  const double t_lo = s.basis.t_lo + 0.1 * (s.basis.t_hi - s.basis.t_lo);
  const double t_hi = s.basis.t_hi - 0.1 * (s.basis.t_hi - s.basis.t_lo);

  double worst_rel = 0.0;
  int sigma_ok = 0;
  int usable = 0;
  for (const BatchRun& run : batch.runs) {
    if (!run.clean) continue;
    ++usable;
    if (std::abs(run.result.params.sigma_sq - s.sigma_sq) <= 0.1 * s.sigma_sq)
      ++sigma_ok;
  }

  for (int c = 0; c < c_total; ++c) {
    Eigen::VectorXd truth = design.values * s.gammas.row(c).transpose();
    for (std::size_t r = 0; r < s.times.size(); ++r) {
      if (s.times[r] < t_lo || s.times[r] > t_hi) continue;
      std::vector<double> estimates;
      for (const BatchRun& run : batch.runs) {
        if (!run.clean) continue;
        Eigen::VectorXd curve =
            design.values * run.result.params.gammas.row(c).transpose();
        estimates.push_back(curve(static_cast<Eigen::Index>(r)));
      }
      if (estimates.empty()) continue;
      std::nth_element(estimates.begin(), estimates.begin() + estimates.size() / 2,
                       estimates.end());
      double med_hi = estimates[estimates.size() / 2];
      std::nth_element(estimates.begin(),
                       estimates.begin() + (estimates.size() - 1) / 2,
                       estimates.end());
      double med_lo = estimates[(estimates.size() - 1) / 2];
      double median = 0.5 * (med_lo + med_hi);
      double want = truth(static_cast<Eigen::Index>(r));
      worst_rel = std::max(worst_rel, std::abs(median - want) / std::abs(want));
    }
  }

  Line out;
  out.pass = usable == 20 && worst_rel <= 0.10 && sigma_ok >= 16;
  out.details = "max pointwise median typology error " + fmt(100.0 * worst_rel, 3) +
                "% (limit 10%), sigma_sq within 10% of " + fmt(s.sigma_sq, 3) + " in " +
                std::to_string(sigma_ok) + "/20 runs (need 16)";
  return out;
}

// ---- criterion 8: single-day fits end up on the zero variance boundary ----

Line criterion_8() {
  SimScenario scenario = build_case(3, default_base_gammas(), 1, 1);
  finalize_scenario(scenario);

  FitConfig config;
  config.basis = scenario.basis;
  config.num_threads = worker_count();

  int zero_boundary = 0, clean = 0;
  std::string first_error;
  for (int r = 0; r < 20; ++r) {
    try {
      std::vector<TransformerData> data = simulate_dataset(scenario, r);
      FitConfig cfg = config;
      cfg.seed = 100 + static_cast<std::uint64_t>(r);
      FitResult res = fit(data, FraudMatrix(scenario.fraud), cfg);
      ++clean;
      if (res.params.sigma_gamma_sq(0) == 0.0) ++zero_boundary;
    } catch (const std::exception& e) {
      if (first_error.empty()) first_error = e.what();
    }
  }

  Line out;
  out.pass = clean == 20 && zero_boundary >= 1;
  out.details = std::to_string(zero_boundary) +
                "/20 single-day runs pinned sigma_gamma_sq[0] at zero (need >= 1), " +
                std::to_string(clean) + "/20 terminated cleanly";
  if (!first_error.empty()) out.details += ", error: " + first_error;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) {
    int v = std::atoi(argv[i]);
    if (v < 1 || v > 8) {
      std::cerr << "usage: " << argv[0] << " [criterion 1..8 ...]\n";
      return 2;
    }
    wanted.push_back(v);
  }
  if (wanted.empty()) wanted = {1, 2, 3, 4, 5, 6, 7, 8};
  std::set<int> selected(wanted.begin(), wanted.end());

  std::optional<Batch> batch;
  if (selected.count(5) || selected.count(6) || selected.count(7))
    batch = run_case1_batch();

  bool all_pass = true;
  for (int n : selected) {
    Line line;
    switch (n) {
      case 1: line = criterion_1(); break;
      case 2: line = criterion_2(); break;
      case 3: line = criterion_3(); break;
      case 4: line = criterion_4(); break;
      case 5: line = criterion_5(*batch); break;
      case 6: line = criterion_6(*batch); break;
      case 7: line = criterion_7(*batch); break;
      case 8: line = criterion_8(); break;
    }
    std::cout << "criterion " << n << ": " << (line.pass ? "PASS" : "FAIL") << " ("
              << line.details << ")\n";
    if (!line.pass) all_pass = false;
  }
  return all_pass ? 0 : 1;
}
