#include <random>

#include <benchmark/benchmark.h>

#include <flexasm/linss.hpp>
#include <flexasm/modal.hpp>
#include <flexasm/pathopt.hpp>
#include <flexasm/robust.hpp>
#include <flexasm/scenario.hpp>

using namespace flexasm;
using Eigen::MatrixXd;

namespace {

linss::StateSpace random_system(int n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  MatrixXd A = MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; i += 2) {
    const double w = 0.1 * (i + 1), z = 0.01;
    A(i, i) = A(i + 1, i + 1) = -z * w;
    A(i, i + 1) = w;
    A(i + 1, i) = -w;
  }
  if (n % 2) A(n - 1, n - 1) = -1.0;
  MatrixXd B(n, 2), C(2, n);
  for (int i = 0; i < n; ++i) {
    B(i, 0) = N(gen);
    B(i, 1) = N(gen);
    C(0, i) = N(gen);
    C(1, i) = N(gen);
  }
  return linss::StateSpace(A, B, C, MatrixXd::Zero(2, 2), {{"w_omega", 2}}, {{"z_omega", 2}});
}

const scenario::Scenario& desk() {
  static const scenario::Scenario sc(scenario::ScenarioConfig::defaults(4));
  return sc;
}

}  // namespace

static void BM_HinfNorm(benchmark::State& st) {
  const auto sys = random_system(static_cast<int>(st.range(0)), 1);
  for (auto _ : st) benchmark::DoNotOptimize(linss::hinf_norm(sys));
}
BENCHMARK(BM_HinfNorm)->Arg(10)->Arg(30)->Arg(60);

static void BM_H2Norm(benchmark::State& st) {
  const auto sys = random_system(static_cast<int>(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(linss::h2_norm(sys));
}
BENCHMARK(BM_H2Norm)->Arg(10)->Arg(30)->Arg(60);

static void BM_MuRealRepeated(benchmark::State& st) {
  const auto sys = random_system(static_cast<int>(st.range(0)), 3);
  for (auto _ : st) benchmark::DoNotOptimize(robust::mu_real_repeated(sys, 100.0).mu_lower);
}
BENCHMARK(BM_MuRealRepeated)->Arg(10)->Arg(30);

static void BM_LatticeModes(benchmark::State& st) {
  const auto layout = modal::default_layout(static_cast<int>(st.range(0)));
  const modal::LatticeParams p;
  for (auto _ : st) {
    const auto m = modal::build_lattice(layout, p);
    benchmark::DoNotOptimize(modal::clamped_free_modes(m, 3).freqs(0));
  }
}
BENCHMARK(BM_LatticeModes)->Arg(4)->Arg(26);

static void BM_ClosedLoop(benchmark::State& st) {
  const auto& sc = desk();
  sc.controller();
  for (auto _ : st) benchmark::DoNotOptimize(sc.closed_loop({3, 2, 1, 1}, {}).num_states());
}
BENCHMARK(BM_ClosedLoop);

static void BM_ShortestPath(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  MatrixXd W = MatrixXd::Constant(n, n, pathopt::kInf);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && U(gen) < 0.1) W(i, j) = 1.0 + U(gen);
  for (int i = 0; i + 1 < n; ++i) W(i, i + 1) = 10.0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(pathopt::shortest_path(W, 0, n - 1, pathopt::SearchMode::Dijkstra).weight);
  }
}
BENCHMARK(BM_ShortestPath)->Arg(57)->Arg(400);
BENCHMARK_MAIN();
