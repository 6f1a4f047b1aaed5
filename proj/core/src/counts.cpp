#include "aggload/counts.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "aggload/errors.hpp"

namespace aggload {

namespace {

double log_factorial(long n) { return std::lgamma(static_cast<double>(n) + 1.0); }

void check_counts(const CountVector& counts, int num_classes, const char* what) {
  if (static_cast<int>(counts.size()) != num_classes) {
    std::ostringstream msg;
    msg << what << ": expected " << num_classes << " classes, got " << counts.size();
    throw InputError(msg.str());
  }
  for (long v : counts) {
    if (v < 0) {
      std::ostringstream msg;
      msg << what << ": negative count " << v;
      throw InputError(msg.str());
    }
  }
}

// Number of ways to write `total` as an ordered sum of `parts` nonnegative
// integers: C(total + parts - 1, parts - 1).  Saturates instead of
// overflowing; only used for enumeration size guards.
double composition_count(long total, int parts) {
  double prod = 1.0;
  for (int i = 1; i <= parts - 1; ++i) {
    prod *= static_cast<double>(total + i) / static_cast<double>(i);
    if (prod > 1e15) return 1e15;
  }
  return prod;
}

// Calls fn(x) for every vector x of `parts` nonnegative integers summing to
// `total`, in lexicographic order.
void for_each_composition(long total, int parts,
                          const std::function<void(const CountVector&)>& fn) {
  CountVector x(parts, 0);
  std::function<void(int, long)> rec = [&](int idx, long remaining) {
    if (idx == parts - 1) {
      x[idx] = remaining;
      fn(x);
      return;
    }
    for (long v = 0; v <= remaining; ++v) {
      x[idx] = v;
      rec(idx + 1, remaining - v);
    }
  };
  rec(0, total);
}

// log pmf of Multinomial(total, probs) at x; -inf when x asks for mass where
// probs has none.
double log_multinomial_pmf(long total, const std::vector<double>& probs,
                           const CountVector& x) {
  double lp = log_factorial(total);
  for (std::size_t c = 0; c < x.size(); ++c) {
    if (x[c] == 0) continue;
    if (probs[c] <= 0.0) return -std::numeric_limits<double>::infinity();
    lp += static_cast<double>(x[c]) * std::log(probs[c]) - log_factorial(x[c]);
  }
  return lp;
}

}  // namespace

// ---- FraudMatrix ----

FraudMatrix::FraudMatrix(Eigen::MatrixXd probs, double row_sum_tol)
    : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.rows() != probs_.cols()) {
    std::ostringstream msg;
    msg << "fraud matrix must be square and nonempty, got " << probs_.rows()
        << "x" << probs_.cols();
    throw InputError(msg.str());
  }
  const double entry_tol = 1e-12;
  for (Eigen::Index c = 0; c < probs_.rows(); ++c) {
    double row_sum = 0.0;
    for (Eigen::Index j = 0; j < probs_.cols(); ++j) {
      double v = probs_(c, j);
      if (!(v >= -entry_tol && v <= 1.0 + entry_tol)) {
        std::ostringstream msg;
        msg << "fraud matrix entry (" << c << "," << j << ") = " << v
            << " outside [0,1]";
        throw InputError(msg.str());
      }
      probs_(c, j) = std::clamp(v, 0.0, 1.0);
      row_sum += probs_(c, j);
    }
    if (std::abs(row_sum - 1.0) > row_sum_tol) {
      std::ostringstream msg;
      msg << "fraud matrix row " << c << " sums to " << row_sum
          << ", expected 1 within " << row_sum_tol;
      throw InputError(msg.str());
    }
    probs_.row(c) /= row_sum;
  }
}

FraudMatrix FraudMatrix::identity(int num_classes) {
  return FraudMatrix(Eigen::MatrixXd::Identity(num_classes, num_classes));
}

Eigen::VectorXd FraudMatrix::column_sums() const {
  return probs_.colwise().sum().transpose();
}

Eigen::VectorXd FraudMatrix::column_probs(int reported_class) const {
  if (reported_class < 0 || reported_class >= num_classes())
    throw InputError("column_probs: reported class out of range");
  Eigen::VectorXd col = probs_.col(reported_class);
  double s = col.sum();
  if (s <= 0.0) {
    std::ostringstream msg;
    msg << "fraud matrix column " << reported_class
        << " has zero mass; reported class unreachable";
    throw InputError(msg.str());
  }
  return col / s;
}

// ---- HTable ----

double HTable::h(const CountVector& m) const {
  if (is_exact()) {
    auto it = exact_probs.find(m);
    return it == exact_probs.end() ? 0.0 : it->second;
  }
  auto it = cell_counts.find(m);
  if (it == cell_counts.end()) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(num_runs);
}

std::vector<CountVector> HTable::support() const {
  std::vector<CountVector> out;
  if (is_exact()) {
    for (const auto& [m, p] : exact_probs)
      if (p > 0.0) out.push_back(m);
  } else {
    for (const auto& [m, n] : cell_counts)
      if (n > 0) out.push_back(m);
  }
  return out;
}

// ---- sampling ----

CountVector sample_reported(const FraudMatrix& fraud, const CountVector& true_counts,
                            RngStream& rng) {
  const int c_total = fraud.num_classes();
  check_counts(true_counts, c_total, "sample_reported: true counts");
  CountVector reported(c_total, 0);
  std::vector<double> row(c_total);
  for (int c = 0; c < c_total; ++c) {
    if (true_counts[c] == 0) continue;
    for (int j = 0; j < c_total; ++j) row[j] = fraud(c, j);
    std::vector<long> draw = rng.multinomial(true_counts[c], row);
    for (int j = 0; j < c_total; ++j) reported[j] += draw[j];
  }
  return reported;
}

HTable estimate_h_table(const FraudMatrix& fraud, const CountVector& reported,
                        long long num_runs, std::uint64_t seed, int num_threads) {
  const int c_total = fraud.num_classes();
  check_counts(reported, c_total, "estimate_h_table: reported counts");
  if (num_runs <= 0) throw InputError("estimate_h_table: num_runs must be positive");

  // Conditional true-class distribution per reported class; also rejects
  // reported mass in unreachable classes.
  std::vector<std::vector<double>> col_probs(c_total);
  for (int j = 0; j < c_total; ++j) {
    if (reported[j] == 0) continue;
    Eigen::VectorXd p = fraud.column_probs(j);
    col_probs[j].assign(p.data(), p.data() + p.size());
  }

  // Fixed chunk layout with stateless per-chunk streams: the table is a pure
  // function of (fraud, reported, num_runs, seed), whatever num_threads is.
  constexpr int kChunks = 64;
  std::vector<long long> chunk_size(kChunks, num_runs / kChunks);
  for (int k = 0; k < static_cast<int>(num_runs % kChunks); ++k) chunk_size[k] += 1;

  std::vector<std::map<CountVector, long long>> partial(kChunks);
  auto run_chunk = [&](int k) {
    RngStream rng = RngStream(seed).derive(static_cast<std::uint64_t>(k));
    CountVector m(c_total);
    for (long long it = 0; it < chunk_size[k]; ++it) {
      std::fill(m.begin(), m.end(), 0L);
      for (int j = 0; j < c_total; ++j) {
        if (reported[j] == 0) continue;
        std::vector<long> draw = rng.multinomial(reported[j], col_probs[j]);
        for (int c = 0; c < c_total; ++c) m[c] += draw[c];
      }
      partial[k][m] += 1;
    }
  };

  int workers = std::clamp(num_threads, 1, kChunks);
  if (workers == 1) {
    for (int k = 0; k < kChunks; ++k) run_chunk(k);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int k = w; k < kChunks; k += workers) run_chunk(k);
      });
    }
    for (auto& t : pool) t.join();
  }

  HTable table;
  table.reported = reported;
  table.num_runs = num_runs;
  table.seed = seed;
  for (int k = 0; k < kChunks; ++k)
    for (const auto& [m, n] : partial[k]) table.cell_counts[m] += n;
  return table;
}

// ---- exact references ----

HTable exact_h(const FraudMatrix& fraud, const CountVector& reported) {
  const int c_total = fraud.num_classes();
  check_counts(reported, c_total, "exact_h: reported counts");

  double work = 1.0;
  for (int j = 0; j < c_total; ++j) {
    work *= composition_count(reported[j], c_total);
    if (work > 1e7) {
      std::ostringstream msg;
      msg << "exact_h: enumeration would exceed 1e7 states for reported counts";
      throw InputError(msg.str());
    }
  }

  // Distribution of the running row-sum vector, one reported class at a time.
  std::map<CountVector, double> dist;
  dist[CountVector(c_total, 0)] = 1.0;
  for (int j = 0; j < c_total; ++j) {
    if (reported[j] == 0) continue;
    Eigen::VectorXd pv = fraud.column_probs(j);
    std::vector<double> p(pv.data(), pv.data() + pv.size());
    std::map<CountVector, double> next;
    for_each_composition(reported[j], c_total, [&](const CountVector& x) {
      double lp = log_multinomial_pmf(reported[j], p, x);
      if (lp == -std::numeric_limits<double>::infinity()) return;
      double pmf = std::exp(lp);
      if (pmf <= 0.0) return;
      CountVector sum(c_total);
      for (const auto& [s, mass] : dist) {
        for (int c = 0; c < c_total; ++c) sum[c] = s[c] + x[c];
        next[sum] += mass * pmf;
      }
    });
    dist.swap(next);
  }

  HTable table;
  table.reported = reported;
  table.num_runs = 0;
  table.exact_probs = std::move(dist);
  return table;
}

double exact_report_prob(const FraudMatrix& fraud, const CountVector& true_counts,
                         const CountVector& reported) {
  const int c_total = fraud.num_classes();
  check_counts(true_counts, c_total, "exact_report_prob: true counts");
  check_counts(reported, c_total, "exact_report_prob: reported counts");
  long sum_m = 0, sum_r = 0;
  for (long v : true_counts) sum_m += v;
  for (long v : reported) sum_r += v;
  if (sum_m != sum_r) {
    std::ostringstream msg;
    msg << "exact_report_prob: true counts sum to " << sum_m
        << " but reported counts sum to " << sum_r;
    throw InputError(msg.str());
  }

  double work = 1.0;
  for (int c = 0; c < c_total; ++c) {
    work *= composition_count(true_counts[c], c_total);
    if (work > 1e7)
      throw InputError("exact_report_prob: enumeration would exceed 1e7 states");
  }

  // Sum over contingency tables with row sums M and column sums R of the
  // product of row-wise multinomial pmfs.  Rows are filled recursively with
  // column budgets pruning the search.
  std::vector<std::vector<double>> rows(c_total);
  for (int c = 0; c < c_total; ++c) {
    rows[c].resize(c_total);
    for (int j = 0; j < c_total; ++j) rows[c][j] = fraud(c, j);
  }

  double total = 0.0;
  CountVector col_used(c_total, 0);
  std::function<void(int, double)> rec = [&](int c, double log_acc) {
    if (c == c_total) {
      for (int j = 0; j < c_total; ++j)
        if (col_used[j] != reported[j]) return;
      total += std::exp(log_acc);
      return;
    }
    for_each_composition(true_counts[c], c_total, [&](const CountVector& x) {
      for (int j = 0; j < c_total; ++j)
        if (col_used[j] + x[j] > reported[j]) return;
      double lp = log_multinomial_pmf(true_counts[c], rows[c], x);
      if (lp == -std::numeric_limits<double>::infinity()) return;
      for (int j = 0; j < c_total; ++j) col_used[j] += x[j];
      rec(c + 1, log_acc + lp);
      for (int j = 0; j < c_total; ++j) col_used[j] -= x[j];
    });
  };
  rec(0, 0.0);
  return total;
}

double report_prob_from_h(const FraudMatrix& fraud, const CountVector& true_counts,
                          const CountVector& reported, double h_value) {
  const int c_total = fraud.num_classes();
  check_counts(true_counts, c_total, "report_prob_from_h: true counts");
  check_counts(reported, c_total, "report_prob_from_h: reported counts");
  long sum_m = 0, sum_r = 0;
  for (long v : true_counts) sum_m += v;
  for (long v : reported) sum_r += v;
  if (sum_m != sum_r)
    throw InputError("report_prob_from_h: count totals disagree");
  if (h_value < 0.0) throw InputError("report_prob_from_h: negative H value");
  if (h_value == 0.0) return 0.0;

  Eigen::VectorXd s = fraud.column_sums();
  double lp = std::log(h_value);
  for (int j = 0; j < c_total; ++j) {
    if (reported[j] == 0) continue;
    if (s(j) <= 0.0) return 0.0;
    lp += static_cast<double>(reported[j]) * std::log(s(j)) - log_factorial(reported[j]);
  }
  for (int c = 0; c < c_total; ++c) lp += log_factorial(true_counts[c]);
  return std::exp(lp);
}

std::vector<CountVector> candidate_counts(const HTable& table) {
  std::vector<CountVector> sup = table.support();
  if (sup.empty()) throw InputError("candidate_counts: H table has empty support");
  std::stable_sort(sup.begin(), sup.end(), [&](const CountVector& a, const CountVector& b) {
    double ha = table.h(a), hb = table.h(b);
    if (ha != hb) return ha > hb;
    return a < b;
  });
  return sup;
}

}  // namespace aggload
