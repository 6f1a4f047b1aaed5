#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "aggload/counts.hpp"
#include "aggload/errors.hpp"
#include "aggload/json_io.hpp"
#include "aggload/rng.hpp"

using aggload::CountVector;
using aggload::FraudMatrix;
using aggload::HTable;
using aggload::InputError;
using aggload::RngStream;

namespace {

FraudMatrix paper_fraud_2x2() {
  Eigen::MatrixXd f(2, 2);
  f << 0.98, 0.02, 0.05, 0.95;
  return FraudMatrix(f);
}

FraudMatrix three_class_fraud() {
  Eigen::MatrixXd f(3, 3);
  f << 0.96, 0.02, 0.02, 0.0, 0.98, 0.02, 0.05, 0.05, 0.90;
  return FraudMatrix(f);
}

// Row-stochastic matrix with entries bounded away from zero, deterministic.
FraudMatrix random_fraud(int c, RngStream& rng) {
  Eigen::MatrixXd f(c, c);
  for (int i = 0; i < c; ++i) {
    double total = 0.0;
    for (int j = 0; j < c; ++j) {
      f(i, j) = 0.05 + rng.uniform();
      total += f(i, j);
    }
    f.row(i) /= total;
  }
  return FraudMatrix(f, 1e-9);
}

// All length-c nonnegative integer vectors summing to total.
void compositions(long total, int c, CountVector& prefix, std::vector<CountVector>& out) {
  if (c == 1) {
    prefix.push_back(total);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (long v = 0; v <= total; ++v) {
    prefix.push_back(v);
    compositions(total - v, c - 1, prefix, out);
    prefix.pop_back();
  }
}

std::vector<CountVector> all_counts(long total, int c) {
  std::vector<CountVector> out;
  CountVector prefix;
  compositions(total, c, prefix, out);
  return out;
}

}  // namespace

TEST_SUITE("counts") {

TEST_CASE("fraud matrix validation") {
  Eigen::MatrixXd ok(2, 2);
  ok << 0.9, 0.1, 0.2, 0.8;
  CHECK_NOTHROW(FraudMatrix{ok});

  Eigen::MatrixXd short_row(2, 2);
  short_row << 0.8, 0.1, 0.2, 0.8;
  CHECK_THROWS_AS(FraudMatrix{short_row}, InputError);

  Eigen::MatrixXd negative(2, 2);
  negative << 1.2, -0.2, 0.2, 0.8;
  CHECK_THROWS_AS(FraudMatrix{negative}, InputError);

  Eigen::MatrixXd rect(2, 3);
  rect << 0.5, 0.3, 0.2, 0.1, 0.6, 0.3;
  CHECK_THROWS_AS(FraudMatrix{rect}, InputError);

  // Slightly-off rows pass only under a loose tolerance.
  Eigen::MatrixXd off(2, 2);
  off << 0.9, 0.100001, 0.2, 0.8;
  CHECK_THROWS_AS(FraudMatrix{off}, InputError);
  CHECK_NOTHROW(FraudMatrix(off, 1e-3));

  FraudMatrix id = FraudMatrix::identity(3);
  CHECK(id.num_classes() == 3);
  CHECK(id(1, 1) == 1.0);
  CHECK(id(1, 2) == 0.0);
}

TEST_CASE("column sums and conditional class probabilities") {
  FraudMatrix f = paper_fraud_2x2();
  Eigen::VectorXd s = f.column_sums();
  CHECK(s(0) == doctest::Approx(1.03).epsilon(1e-14));
  CHECK(s(1) == doctest::Approx(0.97).epsilon(1e-14));

  Eigen::VectorXd p0 = f.column_probs(0);
  CHECK(p0(0) == doctest::Approx(0.98 / 1.03).epsilon(1e-14));
  CHECK(p0(1) == doctest::Approx(0.05 / 1.03).epsilon(1e-14));
  CHECK(p0.sum() == doctest::Approx(1.0).epsilon(1e-14));

  FraudMatrix id = FraudMatrix::identity(3);
  Eigen::VectorXd e1 = id.column_probs(1);
  CHECK(e1(0) == 0.0);
  CHECK(e1(1) == 1.0);
  CHECK(e1(2) == 0.0);

  Eigen::VectorXd q0 = three_class_fraud().column_probs(0);
  CHECK(q0(0) == doctest::Approx(0.96 / 1.01).epsilon(1e-14));
  CHECK(q0(1) == 0.0);
  CHECK(q0(2) == doctest::Approx(0.05 / 1.01).epsilon(1e-14));

  Eigen::MatrixXd dead_col(2, 2);
  dead_col << 1.0, 0.0, 1.0, 0.0;
  CHECK_THROWS_AS((void)FraudMatrix(dead_col).column_probs(1), InputError);
}

TEST_CASE("sample_reported basics") {
  RngStream rng(31);
  FraudMatrix id = FraudMatrix::identity(2);
  for (int i = 0; i < 20; ++i) CHECK(aggload::sample_reported(id, {5, 3}, rng) == CountVector{5, 3});

  FraudMatrix f = paper_fraud_2x2();
  RngStream a(17), b(17);
  for (int i = 0; i < 50; ++i) {
    CountVector ra = aggload::sample_reported(f, {50, 25}, a);
    CHECK(ra == aggload::sample_reported(f, {50, 25}, b));
    CHECK(ra[0] + ra[1] == 75);
  }
}

TEST_CASE("sample_reported frequencies under a uniform row") {
  Eigen::MatrixXd u(2, 2);
  u << 0.5, 0.5, 0.5, 0.5;
  FraudMatrix f(u);
  RngStream rng(101);
  const int reps = 2000;
  const long m_total = 50;
  double sum0 = 0.0;
  for (int i = 0; i < reps; ++i) sum0 += static_cast<double>(aggload::sample_reported(f, {m_total, 0}, rng)[0]);
  double freq = sum0 / (reps * m_total);
  double se = std::sqrt(0.25 / (reps * m_total));
  CHECK(std::abs(freq - 0.5) < 5.0 * se);
}

TEST_CASE("exact report probability") {
  FraudMatrix id = FraudMatrix::identity(2);
  CHECK(aggload::exact_report_prob(id, {4, 2}, {4, 2}) == doctest::Approx(1.0));
  CHECK(aggload::exact_report_prob(id, {4, 2}, {3, 3}) == doctest::Approx(0.0));

  Eigen::MatrixXd m(2, 2);
  m << 0.9, 0.1, 0.2, 0.8;
  FraudMatrix f(m);
  // Two admissible tables: both stay (0.9*0.8) or both flip (0.1*0.2).
  CHECK(aggload::exact_report_prob(f, {1, 1}, {1, 1}) ==
        doctest::Approx(0.74).epsilon(1e-14));

  CHECK_THROWS_AS((void)aggload::exact_report_prob(f, {2, 1}, {1, 1}), InputError);
}

TEST_CASE("exact report probabilities sum to one over all reports") {
  RngStream rng(7);
  for (int c : {2, 3}) {
    FraudMatrix f = random_fraud(c, rng);
    CountVector m = c == 2 ? CountVector{3, 2} : CountVector{2, 2, 1};
    double total = 0.0;
    for (const CountVector& r : all_counts(5, c)) total += aggload::exact_report_prob(f, m, r);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("exact report probability matches Monte Carlo frequencies") {
  FraudMatrix f = paper_fraud_2x2();
  CountVector m{3, 2};
  const int reps = 1000000;
  RngStream rng(55);
  std::vector<long> hits(6, 0);
  for (int i = 0; i < reps; ++i) ++hits[aggload::sample_reported(f, m, rng)[0]];
  for (long r0 = 0; r0 <= 5; ++r0) {
    double exact = aggload::exact_report_prob(f, m, {r0, 5 - r0});
    double freq = static_cast<double>(hits[r0]) / reps;
    double se = std::sqrt(std::max(exact * (1.0 - exact), 1e-12) / reps);
    CHECK(std::abs(freq - exact) < 4.0 * se + 1e-9);
  }
}

TEST_CASE("exact H enumeration") {
  FraudMatrix id = FraudMatrix::identity(2);
  HTable t = aggload::exact_h(id, {4, 6});
  CHECK(t.is_exact());
  CHECK(t.support() == std::vector<CountVector>{{4, 6}});
  CHECK(t.h({4, 6}) == doctest::Approx(1.0));
  CHECK(t.h({5, 5}) == 0.0);

  Eigen::MatrixXd m(2, 2);
  m << 0.9, 0.1, 0.2, 0.8;
  HTable small = aggload::exact_h(FraudMatrix(m), {1, 1});
  CHECK(small.h({2, 0}) == doctest::Approx(1.0 / 11.0).epsilon(1e-13));
  CHECK(small.h({1, 1}) == doctest::Approx(74.0 / 99.0).epsilon(1e-13));
  CHECK(small.h({0, 2}) == doctest::Approx(16.0 / 99.0).epsilon(1e-13));
  double total = 0.0;
  for (const CountVector& cell : small.support()) total += small.h(cell);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Monte Carlo H table") {
  FraudMatrix id = FraudMatrix::identity(2);
  HTable t = aggload::estimate_h_table(id, {4, 6}, 5000, 9);
  CHECK(!t.is_exact());
  CHECK(t.num_runs == 5000);
  CHECK(t.cell_counts.size() == 1);
  CHECK(t.cell_counts.at({4, 6}) == 5000);
  CHECK(t.h({4, 6}) == 1.0);

  SUBCASE("runs land in exactly one cell each") {
    HTable mc = aggload::estimate_h_table(paper_fraud_2x2(), {32, 43}, 20000, 3);
    long long total = 0;
    for (const auto& [cell, count] : mc.cell_counts) {
      total += count;
      long sum = 0;
      for (long v : cell) sum += v;
      CHECK(sum == 75);
    }
    CHECK(total == mc.num_runs);
  }

  SUBCASE("bit-for-bit determinism and worker independence") {
    FraudMatrix f = paper_fraud_2x2();
    HTable a = aggload::estimate_h_table(f, {32, 43}, 30000, 12, 1);
    HTable b = aggload::estimate_h_table(f, {32, 43}, 30000, 12, 1);
    HTable c = aggload::estimate_h_table(f, {32, 43}, 30000, 12, 4);
    CHECK(a.cell_counts == b.cell_counts);
    CHECK(a.cell_counts == c.cell_counts);
    HTable d = aggload::estimate_h_table(f, {32, 43}, 30000, 13, 1);
    CHECK(a.cell_counts != d.cell_counts);
  }

  SUBCASE("agrees with exact enumeration on a small instance") {
    FraudMatrix f = paper_fraud_2x2();
    HTable exact = aggload::exact_h(f, {3, 2});
    HTable mc = aggload::estimate_h_table(f, {3, 2}, 100000, 21);
    for (const CountVector& cell : exact.support()) {
      double p = exact.h(cell);
      double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / 100000.0);
      CHECK(std::abs(mc.h(cell) - p) < 4.0 * se + 1e-9);
    }
  }
}

TEST_CASE("factorized report probability") {
  FraudMatrix id = FraudMatrix::identity(2);
  CHECK(aggload::report_prob_from_h(id, {4, 6}, {4, 6}, 1.0) == doctest::Approx(1.0));

  Eigen::MatrixXd m(2, 2);
  m << 0.9, 0.1, 0.2, 0.8;
  FraudMatrix f(m);
  HTable h = aggload::exact_h(f, {1, 1});
  CHECK(aggload::report_prob_from_h(f, {1, 1}, {1, 1}, h.h({1, 1})) ==
        doctest::Approx(0.74).epsilon(1e-13));
  CHECK(aggload::report_prob_from_h(f, {1, 1}, {1, 1}, 0.0) == 0.0);

  // A reported class with zero column mass makes the report impossible.
  Eigen::MatrixXd dead(2, 2);
  dead << 1.0, 0.0, 1.0, 0.0;
  CHECK(aggload::report_prob_from_h(FraudMatrix(dead), {1, 1}, {1, 1}, 0.5) == 0.0);
}

TEST_CASE("factorization identity on randomized instances") {
  RngStream rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    int c = 2 + static_cast<int>(rng.uniform() * 2.0);
    long total = 1 + static_cast<long>(rng.uniform() * 6.0);
    FraudMatrix f = random_fraud(c, rng);
    std::vector<CountVector> space = all_counts(total, c);
    CountVector m = space[static_cast<std::size_t>(rng.uniform() * space.size())];
    for (const CountVector& r : space) {
      HTable h = aggload::exact_h(f, r);
      double via_h = aggload::report_prob_from_h(f, m, r, h.h(m));
      double direct = aggload::exact_report_prob(f, m, r);
      CHECK(std::abs(via_h - direct) < 1e-12);
    }
  }
}

TEST_CASE("class relabeling leaves the report probability unchanged") {
  RngStream rng(88);
  FraudMatrix f = random_fraud(3, rng);
  CountVector m{2, 1, 3}, r{1, 2, 3};
  double base = aggload::exact_report_prob(f, m, r);

  // Swap classes 0 and 2 everywhere.
  Eigen::PermutationMatrix<3> perm;
  perm.indices() << 2, 1, 0;
  Eigen::MatrixXd swapped = perm.transpose() * f.probs() * perm;
  double relabeled =
      aggload::exact_report_prob(FraudMatrix(swapped, 1e-9), {3, 1, 2}, {3, 2, 1});
  CHECK(relabeled == doctest::Approx(base).epsilon(1e-13));
}

TEST_CASE("candidate ordering") {
  FraudMatrix id = FraudMatrix::identity(2);
  HTable t = aggload::estimate_h_table(id, {7, 3}, 1000, 5);
  CHECK(aggload::candidate_counts(t) == std::vector<CountVector>{{7, 3}});

  HTable fake;
  fake.reported = {2, 2};
  fake.num_runs = 0;
  fake.exact_probs[{0, 4}] = 0.4;
  fake.exact_probs[{1, 3}] = 0.3;
  fake.exact_probs[{3, 1}] = 0.3;
  fake.exact_probs[{4, 0}] = 0.0;
  std::vector<CountVector> order = aggload::candidate_counts(fake);
  REQUIRE(order.size() == 3);  // zero-mass cell dropped
  CHECK(order[0] == CountVector{0, 4});
  CHECK(order[1] == CountVector{1, 3});  // tie on mass, lexicographic
  CHECK(order[2] == CountVector{3, 1});

  HTable empty;
  empty.reported = {1, 1};
  CHECK_THROWS_AS((void)aggload::candidate_counts(empty), InputError);
}

TEST_CASE("enumeration guard rejects huge instances") {
  FraudMatrix f = paper_fraud_2x2();
  CHECK_THROWS_AS((void)aggload::exact_report_prob(f, {5000, 5000}, {5000, 5000}),
                  InputError);
}

TEST_CASE("H table JSON round trip") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "aggload_unit_counts";
  fs::create_directories(dir);

  FraudMatrix f = paper_fraud_2x2();
  HTable mc = aggload::estimate_h_table(f, {5, 4}, 20000, 77);
  fs::path mc_path = dir / "mc.json";
  aggload::save_htable(mc, mc_path.string());
  HTable mc2 = aggload::load_htable(mc_path.string());
  CHECK(mc2.reported == mc.reported);
  CHECK(mc2.num_runs == mc.num_runs);
  CHECK(mc2.seed == mc.seed);
  CHECK(mc2.cell_counts == mc.cell_counts);

  HTable ex = aggload::exact_h(f, {3, 2});
  fs::path ex_path = dir / "exact.json";
  aggload::save_htable(ex, ex_path.string());
  HTable ex2 = aggload::load_htable(ex_path.string());
  CHECK(ex2.is_exact());
  REQUIRE(ex2.exact_probs.size() == ex.exact_probs.size());
  for (const auto& [cell, p] : ex.exact_probs)
    CHECK(ex2.exact_probs.at(cell) == doctest::Approx(p).epsilon(1e-15));
}

}  // TEST_SUITE
