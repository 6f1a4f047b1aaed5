#include "aggload/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>
#include <sstream>

#include "aggload/errors.hpp"
#include "optimize.hpp"

namespace aggload {

namespace {

constexpr std::uint64_t kTagHTable = 0x6874626CULL;  // "htbl"
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_factorial(long n) { return std::lgamma(static_cast<double>(n) + 1.0); }

// Rotated sufficient statistics: with Psi Psi' = Q' diag(Gamma) Q, every
// covariance is diagonal in the Q basis, so the Gaussian core needs only
// Q Phi, per-transformer day sums and per-coordinate sums of squares.
struct Workspace {
  DesignMatrix design;
  EigenCache cache;
  Eigen::MatrixXd qphi;                   // n x K
  std::vector<Eigen::ArrayXd> qy_sum;     // per transformer, length n
  std::vector<Eigen::ArrayXd> qy_sumsq;   // per transformer, length n
  int n = 0;
  int k = 0;
  int c = 0;
  int days = 0;
  double gram_trace = 0.0;                // tr(Psi Psi') = sum of eigenvalues
  double mean_consumers = 0.0;
};

Workspace build_workspace(const std::vector<TransformerData>& data,
                          const BasisSpec& basis) {
  validate_dataset(data);
  basis.validate();
  Workspace ws;
  ws.design = eval_basis(basis, data.front().times);
  ws.cache = build_eigen_cache(ws.design);
  ws.qphi = ws.cache.q * ws.design.values;
  ws.n = static_cast<int>(ws.design.times.size());
  ws.k = basis.num_basis;
  ws.c = static_cast<int>(data.front().reported.size());
  ws.days = data.front().num_days();
  ws.gram_trace = ws.cache.eigenvalues.sum();
  double total = 0.0;
  for (const TransformerData& t : data) {
    Eigen::MatrixXd qy = ws.cache.q * t.y;
    ws.qy_sum.push_back(qy.rowwise().sum().array());
    ws.qy_sumsq.push_back(qy.array().square().rowwise().sum());
    total += static_cast<double>(t.num_consumers);
  }
  ws.mean_consumers = total / static_cast<double>(data.size());
  return ws;
}

double coeff_scale(const CountVector& m, const Eigen::VectorXd& sigma_gamma_sq) {
  double a = 0.0;
  for (std::size_t c = 0; c < m.size(); ++c)
    a += static_cast<double>(m[c]) * std::max(sigma_gamma_sq(static_cast<Eigen::Index>(c)), 0.0);
  return a;
}

Eigen::VectorXd mean_coeff(const Eigen::MatrixXd& gammas, const CountVector& m) {
  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(gammas.cols());
  for (std::size_t c = 0; c < m.size(); ++c)
    coeff += static_cast<double>(m[c]) * gammas.row(static_cast<Eigen::Index>(c)).transpose();
  return coeff;
}

// Gaussian core for one transformer given its rotated mean and spectrum.
double l1_one(const Workspace& ws, std::size_t i, const Eigen::ArrayXd& qmu,
              const Eigen::ArrayXd& delta) {
  if (!(delta.minCoeff() > 0.0)) {
    std::ostringstream msg;
    msg << "covariance not positive definite (rotated eigenvalues reach "
        << delta.minCoeff() << ")";
    throw NumericalError(msg.str());
  }
  const double d = static_cast<double>(ws.days);
  double out = d * delta.log().sum();
  out += ((ws.qy_sumsq[i] - 2.0 * qmu * ws.qy_sum[i] + d * qmu.square()) / delta).sum();
  return out;
}

double l1_total(const Workspace& ws, const Eigen::MatrixXd& gammas,
                const Eigen::VectorXd& sigma_gamma_sq, double sigma_sq,
                const std::vector<CountVector>& counts) {
  double out = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    Eigen::ArrayXd qmu = (ws.qphi * mean_coeff(gammas, counts[i])).array();
    Eigen::ArrayXd delta =
        (coeff_scale(counts[i], sigma_gamma_sq) * ws.cache.eigenvalues).array() + sigma_sq;
    out += l1_one(ws, i, qmu, delta);
  }
  return out;
}

// m-free factor of log P{R | M}: sum_j [R_j log S_j - log R_j!].
double count_const(const FraudMatrix& fraud, const CountVector& reported) {
  Eigen::VectorXd s = fraud.column_sums();
  double lp = 0.0;
  for (std::size_t j = 0; j < reported.size(); ++j) {
    if (reported[j] == 0) continue;
    if (s(static_cast<Eigen::Index>(j)) <= 0.0) return kNegInf;
    lp += static_cast<double>(reported[j]) * std::log(s(static_cast<Eigen::Index>(j))) -
          log_factorial(reported[j]);
  }
  return lp;
}

double count_var_part(const HTable& table, const CountVector& m) {
  double h = table.h(m);
  if (h <= 0.0) return kNegInf;
  double lp = std::log(h);
  for (long v : m) lp += log_factorial(v);
  return lp;
}

struct State {
  Eigen::MatrixXd gammas;
  Eigen::VectorXd sigma_gamma_sq;
  double sigma_sq = 0.0;
  std::vector<CountVector> counts;
};

LikelihoodBreakdown eval_total(const Workspace& ws, const State& st,
                               const std::vector<HTable>& tables,
                               const std::vector<double>& count_consts) {
  LikelihoodBreakdown out;
  const double n_obs = static_cast<double>(ws.n) * static_cast<double>(ws.days);
  out.gauss = -0.5 * l1_total(ws, st.gammas, st.sigma_gamma_sq, st.sigma_sq, st.counts) -
              0.5 * n_obs * kLog2Pi * static_cast<double>(st.counts.size());
  out.counts = 0.0;
  for (std::size_t i = 0; i < st.counts.size(); ++i)
    out.counts += count_consts[i] + count_var_part(tables[i], st.counts[i]);
  out.total = out.gauss + out.counts;
  return out;
}

// ---- internal updates on the workspace ----

Eigen::MatrixXd gls_gammas(const Workspace& ws, const std::vector<CountVector>& counts,
                           const Eigen::VectorXd& sigma_gamma_sq, double sigma_sq) {
  const int dim = ws.c * ws.k;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    Eigen::ArrayXd delta =
        (coeff_scale(counts[i], sigma_gamma_sq) * ws.cache.eigenvalues).array() + sigma_sq;
    if (!(delta.minCoeff() > 0.0))
      throw NumericalError("typology update: covariance not positive definite");
    Eigen::ArrayXd w = delta.inverse();
    Eigen::MatrixXd g = ws.qphi.transpose() * w.matrix().asDiagonal() * ws.qphi;
    Eigen::VectorXd r = ws.qphi.transpose() * (ws.qy_sum[i] * w).matrix();
    for (int c1 = 0; c1 < ws.c; ++c1) {
      const double m1 = static_cast<double>(counts[i][c1]);
      b.segment(c1 * ws.k, ws.k) += m1 * r;
      for (int c2 = 0; c2 < ws.c; ++c2) {
        const double m2 = static_cast<double>(counts[i][c2]);
        a.block(c1 * ws.k, c2 * ws.k, ws.k, ws.k) +=
            static_cast<double>(ws.days) * m1 * m2 * g;
      }
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible())
    throw NumericalError(
        "typology update: normal equations are singular; the per-transformer "
        "count vectors do not separate the classes (proportional counts)");
  Eigen::VectorXd g = lu.solve(b);
  Eigen::MatrixXd out(ws.c, ws.k);
  for (int c = 0; c < ws.c; ++c) out.row(c) = g.segment(c * ws.k, ws.k).transpose();
  return out;
}

// Per-transformer pieces of l1 that depend only on the spectrum once the
// means are frozen: l1 = sum_i [D sum log delta_i + sum num_i / delta_i].
struct SpectrumObjective {
  const Workspace* ws;
  std::vector<Eigen::ArrayXd> num;     // per transformer, length n
  std::vector<const CountVector*> counts;

  double operator()(const Eigen::VectorXd& sigma_gamma_sq, double sigma_sq) const {
    double out = 0.0;
    for (std::size_t i = 0; i < num.size(); ++i) {
      Eigen::ArrayXd delta =
          (coeff_scale(*counts[i], sigma_gamma_sq) * ws->cache.eigenvalues).array() +
          sigma_sq;
      if (!(delta.minCoeff() > 0.0)) return std::numeric_limits<double>::infinity();
      out += static_cast<double>(ws->days) * delta.log().sum() + (num[i] / delta).sum();
    }
    return out;
  }
};

SpectrumObjective make_spectrum_objective(const Workspace& ws,
                                          const Eigen::MatrixXd& gammas,
                                          const std::vector<CountVector>& counts) {
  SpectrumObjective obj;
  obj.ws = &ws;
  const double d = static_cast<double>(ws.days);
  for (const CountVector& m : counts) {
    Eigen::ArrayXd qmu = (ws.qphi * mean_coeff(gammas, m)).array();
    obj.num.push_back(ws.qy_sumsq[obj.num.size()] - 2.0 * qmu * ws.qy_sum[obj.num.size()] +
                      d * qmu.square());
    obj.counts.push_back(&m);
  }
  return obj;
}

double sigma_sq_search(const Workspace& ws, const Eigen::MatrixXd& gammas,
                       const Eigen::VectorXd& sigma_gamma_sq, double sigma_sq,
                       const std::vector<CountVector>& counts, const FitConfig& config,
                       std::string* warning) {
  SpectrumObjective obj = make_spectrum_objective(ws, gammas, counts);
  auto f = [&](double s) { return obj(sigma_gamma_sq, s); };

  const double lo = config.sigma_sq_floor;
  const double cur = std::max(sigma_sq, lo);
  double hi = 10.0 * cur;
  detail::ScalarMin best{cur, f(cur)};
  for (int attempt = 0; attempt <= 3; ++attempt) {
    detail::ScalarMin m = detail::brent_minimize(f, lo, hi, config.inner_tol);
    if (m.f < best.f) best = m;
    if (m.x < 0.999 * hi) return best.x;
    if (attempt == 3 && warning != nullptr)
      *warning = "sigma_sq search stopped at the widened upper bracket";
    hi *= 10.0;
  }
  return best.x;
}

Eigen::VectorXd sigma_gamma_search(const Workspace& ws, const Eigen::MatrixXd& gammas,
                                   double sigma_sq, const Eigen::VectorXd& current,
                                   const std::vector<CountVector>& counts,
                                   const FitConfig& config) {
  SpectrumObjective obj = make_spectrum_objective(ws, gammas, counts);
  auto clamp0 = [](const Eigen::VectorXd& v) {
    return v.cwiseMax(0.0).eval();
  };
  auto f = [&](const Eigen::VectorXd& v) { return obj(clamp0(v), sigma_sq); };

  // Scale for exploring away from zero: the consumer variance at which the
  // consumer term matches a few percent of the measurement noise.
  const double mean_eig = ws.gram_trace / static_cast<double>(ws.n);
  const double unit =
      sigma_sq / (std::max(1.0, ws.mean_consumers) * std::max(mean_eig, 1e-12));

  Eigen::VectorXd x0 = clamp0(current);
  Eigen::VectorXd steps(x0.size());
  for (Eigen::Index c = 0; c < x0.size(); ++c)
    steps(c) = std::max(0.25 * x0(c), 0.05 * unit);
  detail::SimplexMin first = detail::nelder_mead(f, x0, steps, config.inner_tol);

  // One restart from the perturbed optimum guards against premature simplex
  // collapse; keep whichever run (or the incumbent) scores best.
  Eigen::VectorXd x1 = clamp0(first.x);
  for (Eigen::Index c = 0; c < x1.size(); ++c)
    x1(c) = x1(c) > 0.0 ? 1.1 * x1(c) : 0.05 * unit;
  Eigen::VectorXd restart_steps = (0.1 * x1).cwiseMax(0.05 * unit);
  detail::SimplexMin second = detail::nelder_mead(f, x1, restart_steps, config.inner_tol);

  Eigen::VectorXd best = clamp0(current);
  double best_f = f(best);
  if (first.f < best_f) {
    best = clamp0(first.x);
    best_f = first.f;
  }
  if (second.f < best_f) best = clamp0(second.x);
  return best;
}

std::vector<CountVector> count_scan(const Workspace& ws, const State& st,
                                    const std::vector<TransformerData>& data,
                                    const std::vector<HTable>& tables,
                                    const std::vector<std::vector<CountVector>>& candidates,
                                    std::vector<std::map<CountVector, double>>* lstar_out) {
  std::vector<CountVector> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const CountVector& reported = data[i].reported;
    const CountVector* best = nullptr;
    double best_lstar = kNegInf;
    long best_dist = std::numeric_limits<long>::max();
    std::map<CountVector, double> table_out;
    for (const CountVector& m : candidates[i]) {
      Eigen::ArrayXd qmu = (ws.qphi * mean_coeff(st.gammas, m)).array();
      Eigen::ArrayXd delta =
          (coeff_scale(m, st.sigma_gamma_sq) * ws.cache.eigenvalues).array() + st.sigma_sq;
      double value = -0.5 * l1_one(ws, i, qmu, delta) + count_var_part(tables[i], m);
      if (lstar_out != nullptr) table_out[m] = value;
      long dist = 0;
      for (std::size_t c = 0; c < m.size(); ++c) dist += std::labs(m[c] - reported[c]);
      if (best == nullptr || value > best_lstar ||
          (value == best_lstar && (dist < best_dist || (dist == best_dist && m < *best)))) {
        best = &m;
        best_lstar = value;
        best_dist = dist;
      }
    }
    if (best == nullptr) throw NumericalError("count scan: no candidates");
    if (lstar_out != nullptr) (*lstar_out)[i] = std::move(table_out);
    out.push_back(*best);
  }
  return out;
}

double rel_change(double before, double after) {
  if (!std::isfinite(before) || !std::isfinite(after))
    return std::numeric_limits<double>::infinity();
  return std::abs(after - before) / std::max(1.0, std::abs(before));
}

void check_fraud_matches(const std::vector<TransformerData>& data,
                         const FraudMatrix& fraud) {
  if (static_cast<int>(data.front().reported.size()) != fraud.num_classes())
    throw InputError("fit: fraud matrix class count does not match the data");
}

}  // namespace

// ---- initial values ----

double init_sigma_sq(const std::vector<TransformerData>& data, const BasisSpec& basis) {
  validate_dataset(data);
  basis.validate();
  DesignMatrix design = eval_basis(basis, data.front().times);
  const int n = static_cast<int>(design.times.size());
  const int k = basis.num_basis;
  if (n <= k) {
    std::ostringstream msg;
    msg << "init_sigma_sq: need more grid points (" << n << ") than basis functions ("
        << k << ")";
    throw InputError(msg.str());
  }

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(design.values);
  double rss = 0.0;
  long denom = 0;
  for (const TransformerData& t : data) {
    for (int d = 0; d < t.num_days(); ++d) {
      Eigen::VectorXd y = t.y.col(d);
      Eigen::VectorXd fitted = design.values * qr.solve(y);
      rss += (y - fitted).squaredNorm();
      denom += n - k;
    }
  }
  return rss / static_cast<double>(denom);
}

Eigen::VectorXd init_sigma_gamma(const std::vector<TransformerData>& data,
                                 const BasisSpec& basis,
                                 const std::vector<CountVector>& counts,
                                 const Eigen::MatrixXd& gammas, double sigma_sq,
                                 const Eigen::VectorXd& variance_ratios) {
  validate_dataset(data);
  basis.validate();
  if (counts.size() != data.size())
    throw InputError("init_sigma_gamma: one count vector per transformer required");
  const int c_total = static_cast<int>(data.front().reported.size());
  Eigen::VectorXd ratios = variance_ratios;
  if (ratios.size() == 0) ratios = Eigen::VectorXd::Ones(c_total);
  if (ratios.size() != c_total)
    throw InputError("init_sigma_gamma: variance ratio length does not match classes");
  for (Eigen::Index c = 0; c < ratios.size(); ++c)
    if (!(ratios(c) > 0.0))
      throw InputError("init_sigma_gamma: variance ratios must be positive");
  ratios /= ratios(c_total - 1);  // express every class relative to the last

  DesignMatrix design = eval_basis(basis, data.front().times);
  const int n = static_cast<int>(design.times.size());
  const double gram_trace = design.values.squaredNorm();  // tr(Psi Psi')
  const int days = data.front().num_days();

  // Moment sum and its expectation coefficient in sigma_gamma_C^2.
  double lhs = 0.0;
  double weight = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const TransformerData& t = data[i];
    if (static_cast<int>(counts[i].size()) != c_total)
      throw InputError("init_sigma_gamma: count vector length mismatch");
    double unit_scale = 0.0;  // sum_c M_ci s_c
    for (int c = 0; c < c_total; ++c)
      unit_scale += static_cast<double>(counts[i][c]) * ratios(c);
    weight += unit_scale * gram_trace;

    if (days >= 2) {
      // Per-grid-point sample variance across days.
      for (int r = 0; r < n; ++r) {
        double mean = t.y.row(r).mean();
        double ss = 0.0;
        for (int d = 0; d < days; ++d) ss += (t.y(r, d) - mean) * (t.y(r, d) - mean);
        lhs += ss / static_cast<double>(days - 1);
      }
    } else {
      Eigen::VectorXd mu = design.values * mean_coeff(gammas, counts[i]);
      lhs += (t.y.col(0) - mu).squaredNorm();
    }
  }
  if (!(weight > 0.0))
    throw InputError("init_sigma_gamma: zero moment weight (no consumers or empty basis)");

  const double base =
      std::max(0.0, (lhs - static_cast<double>(data.size()) * n * sigma_sq) / weight);
  return ratios * base;
}

// ---- public coordinate updates ----

Eigen::MatrixXd update_gammas(const std::vector<TransformerData>& data,
                              const BasisSpec& basis,
                              const std::vector<CountVector>& counts,
                              const Eigen::VectorXd& sigma_gamma_sq, double sigma_sq) {
  Workspace ws = build_workspace(data, basis);
  if (counts.size() != data.size())
    throw InputError("update_gammas: one count vector per transformer required");
  return gls_gammas(ws, counts, sigma_gamma_sq, sigma_sq);
}

double update_sigma_sq(const std::vector<TransformerData>& data, const BasisSpec& basis,
                       const std::vector<CountVector>& counts,
                       const Eigen::MatrixXd& gammas,
                       const Eigen::VectorXd& sigma_gamma_sq, double sigma_sq,
                       const FitConfig& config, std::string* warning) {
  Workspace ws = build_workspace(data, basis);
  return sigma_sq_search(ws, gammas, sigma_gamma_sq, sigma_sq, counts, config, warning);
}

Eigen::VectorXd update_sigma_gamma(const std::vector<TransformerData>& data,
                                   const BasisSpec& basis,
                                   const std::vector<CountVector>& counts,
                                   const Eigen::MatrixXd& gammas, double sigma_sq,
                                   const Eigen::VectorXd& sigma_gamma_sq,
                                   const FitConfig& config) {
  Workspace ws = build_workspace(data, basis);
  return sigma_gamma_search(ws, gammas, sigma_sq, sigma_gamma_sq, counts, config);
}

std::vector<CountVector> update_counts(const ModelParams& params,
                                       const std::vector<TransformerData>& data,
                                       const std::vector<HTable>& tables) {
  params.validate();
  if (tables.size() != data.size())
    throw InputError("update_counts: one H table per transformer required");
  Workspace ws = build_workspace(data, params.basis);
  std::vector<std::vector<CountVector>> candidates;
  candidates.reserve(tables.size());
  for (const HTable& t : tables) candidates.push_back(candidate_counts(t));
  State st{params.gammas, params.sigma_gamma_sq, params.sigma_sq, params.counts};
  return count_scan(ws, st, data, tables, candidates, nullptr);
}

// ---- driver ----

FitResult fit(const std::vector<TransformerData>& data, const FraudMatrix& fraud,
              const FitConfig& config) {
  Workspace ws = build_workspace(data, config.basis);
  check_fraud_matches(data, fraud);
  if (config.max_outer_iters < 1) throw InputError("fit: max_outer_iters must be >= 1");
  if (config.rel_tol <= 0.0) throw InputError("fit: rel_tol must be positive");

  FitResult result;
  result.times = data.front().times;

  // Frozen per-transformer H tables; the whole fit sees one fixed set, so
  // the objective is deterministic given (data, fraud, config).
  std::vector<std::vector<CountVector>> candidates;
  std::vector<double> count_consts;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (config.exact_tables) {
      result.tables.push_back(exact_h(fraud, data[i].reported));
    } else {
      std::uint64_t table_seed =
          RngStream(config.seed).derive(kTagHTable).derive(static_cast<std::uint64_t>(i)).seed();
      result.tables.push_back(estimate_h_table(fraud, data[i].reported, config.h_runs,
                                               table_seed, config.num_threads));
    }
    candidates.push_back(candidate_counts(result.tables.back()));
    count_consts.push_back(count_const(fraud, data[i].reported));
  }

  // Starting point: reported counts, then GLS typologies under plain least
  // squares, then moment starts for the variances.
  State st;
  st.counts.reserve(data.size());
  for (const TransformerData& t : data) st.counts.push_back(t.reported);
  if (config.initial.has_value()) {
    const ModelParams& init = *config.initial;
    init.validate();
    if (init.basis != config.basis)
      throw InputError("fit: initial params use a different basis");
    if (init.num_classes() != ws.c)
      throw InputError("fit: initial params use a different class count");
    st.gammas = init.gammas;
    st.sigma_gamma_sq = init.sigma_gamma_sq;
    st.sigma_sq = std::max(init.sigma_sq, config.sigma_sq_floor);
    if (!init.counts.empty()) {
      if (init.counts.size() != data.size())
        throw InputError("fit: initial counts must cover every transformer");
      st.counts = init.counts;
    }
  } else {
    st.gammas = gls_gammas(ws, st.counts, Eigen::VectorXd::Zero(ws.c), 1.0);
    st.sigma_sq = std::max(init_sigma_sq(data, config.basis), config.sigma_sq_floor);
    st.sigma_gamma_sq = init_sigma_gamma(data, config.basis, st.counts, st.gammas,
                                         st.sigma_sq, config.variance_ratios);
  }

  std::set<std::string> warnings;
  LikelihoodBreakdown bd = eval_total(ws, st, result.tables, count_consts);
  result.trace.push_back({0, "init", bd.total});

  double cycle_loglik = bd.total;
  int iter = 0;
  while (iter < config.max_outer_iters) {
    ++iter;

    // Typologies: exact GLS minimizer; guard against roundoff regressions.
    {
      double before = l1_total(ws, st.gammas, st.sigma_gamma_sq, st.sigma_sq, st.counts);
      Eigen::MatrixXd proposal = gls_gammas(ws, st.counts, st.sigma_gamma_sq, st.sigma_sq);
      double after = l1_total(ws, proposal, st.sigma_gamma_sq, st.sigma_sq, st.counts);
      if (after <= before) st.gammas = std::move(proposal);
      bd = eval_total(ws, st, result.tables, count_consts);
      result.trace.push_back({iter, "gammas", bd.total});
    }

    {
      std::string warning;
      st.sigma_sq = sigma_sq_search(ws, st.gammas, st.sigma_gamma_sq, st.sigma_sq,
                                    st.counts, config, &warning);
      if (!warning.empty()) warnings.insert(warning);
      bd = eval_total(ws, st, result.tables, count_consts);
      result.trace.push_back({iter, "sigma_sq", bd.total});
    }

    {
      st.sigma_gamma_sq =
          sigma_gamma_search(ws, st.gammas, st.sigma_sq, st.sigma_gamma_sq, st.counts, config);
      bd = eval_total(ws, st, result.tables, count_consts);
      result.trace.push_back({iter, "sigma_gamma", bd.total});
    }

    bool counts_changed = false;
    {
      std::vector<CountVector> proposal =
          count_scan(ws, st, data, result.tables, candidates, nullptr);
      counts_changed = proposal != st.counts;
      st.counts = std::move(proposal);
      bd = eval_total(ws, st, result.tables, count_consts);
      result.trace.push_back({iter, "counts", bd.total});
    }

    if (!counts_changed && rel_change(cycle_loglik, bd.total) < config.rel_tol) {
      result.converged = true;
      break;
    }
    cycle_loglik = bd.total;
  }
  result.iterations = iter;

  result.params.basis = config.basis;
  result.params.gammas = st.gammas;
  result.params.sigma_gamma_sq = st.sigma_gamma_sq;
  result.params.sigma_sq = st.sigma_sq;
  result.params.counts = st.counts;
  result.breakdown = bd;

  result.lstar_tables.resize(data.size());
  count_scan(ws, st, data, result.tables, candidates, &result.lstar_tables);

  for (int c = 0; c < ws.c; ++c) {
    if (st.sigma_gamma_sq(c) == 0.0) {
      std::ostringstream msg;
      msg << "sigma_gamma_sq[" << c << "] ended on the zero boundary";
      warnings.insert(msg.str());
    }
  }
  result.warnings.assign(warnings.begin(), warnings.end());

  result.observed_mean.resize(ws.n, static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    result.observed_mean.col(static_cast<Eigen::Index>(i)) = data[i].y.rowwise().mean();
    result.transformer_ids.push_back(data[i].id);
  }

  return result;
}

}  // namespace aggload
