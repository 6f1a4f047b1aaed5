#include <benchmark/benchmark.h>

#include "aggload/basis.hpp"
#include "aggload/counts.hpp"
#include "aggload/likelihood.hpp"
#include "aggload/simulate.hpp"

using namespace aggload;

namespace {

SimScenario scenario() { return build_case(1, default_base_gammas(), 99, 5); }

void BM_EvalBasis(benchmark::State& state) {
  BasisSpec spec{3, 9, 0.0, 24.0};
  std::vector<double> grid = default_observation_grid();
  for (auto _ : state) {
    DesignMatrix d = eval_basis(spec, grid);
    benchmark::DoNotOptimize(d.values.data());
  }
}
BENCHMARK(BM_EvalBasis);

void BM_HTable(benchmark::State& state) {
  Eigen::MatrixXd f(2, 2);
  f << 0.98, 0.02, 0.05, 0.95;
  FraudMatrix fraud(f);
  CountVector reported{32, 43};
  const long long runs = state.range(0);
  for (auto _ : state) {
    HTable t = estimate_h_table(fraud, reported, runs, 1234);
    benchmark::DoNotOptimize(t.cell_counts.size());
  }
}
BENCHMARK(BM_HTable)->Arg(10000)->Arg(100000);

void BM_GaussDirect(benchmark::State& state) {
  SimScenario s = scenario();
  std::vector<TransformerData> data = simulate_dataset(s, 0);
  ModelParams params = s.params();
  for (auto _ : state) {
    double v = gauss_neg2ll(params, data[0], params.counts[0]);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_GaussDirect);

void BM_GaussEigenPath(benchmark::State& state) {
  SimScenario s = scenario();
  std::vector<TransformerData> data = simulate_dataset(s, 0);
  ModelParams params = s.params();
  DesignMatrix design = eval_basis(params.basis, data[0].times);
  EigenCache cache = build_eigen_cache(design);
  for (auto _ : state) {
    double v = gauss_neg2ll_eigen(params, data[0], params.counts[0], cache);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_GaussEigenPath);

}  // namespace

BENCHMARK_MAIN();
