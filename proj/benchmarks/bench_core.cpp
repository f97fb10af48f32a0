#include <memory>

#include <benchmark/benchmark.h>

#include "ivbounds/baselines.hpp"
#include "ivbounds/problem.hpp"
#include "ivbounds/solver.hpp"

namespace {

using namespace ivbounds;

struct Fixture {
  Dataset data;
  ResponseBasis basis;
  std::shared_ptr<const ConstraintLayout> layout;

  Fixture(int k, int m_count, int batch) : basis(polynomial_basis(k)) {
    SyntheticSpec spec;
    spec.seed = 1;
    data = generate(spec).dataset();
    const MomentDictionary dict{2};
    const ConstraintSet cs = build_constraint_set(data, make_z_grid(data, m_count), dict, batch, 0.2, 0.05);
    layout = std::make_shared<const ConstraintLayout>(marginal_layout(cs.lhs_smoothed, cs.b, cs.x_hat, basis, dict));
  }
};

void BM_Evaluate(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const bool gradient = state.range(1) != 0;
  const Fixture f(k, 20, 1024);
  const Problem problem(f.layout, f.basis, 0.3);
  Rng rng(1);
  const NoiseBatch noise = problem.draw_noise(rng);
  const EtaParams eta = init_eta(f.basis, f.data.x, 2);
  LagrangianState lag;
  lag.lambda = Eigen::MatrixXd::Constant(f.layout->lhs.rows(), f.layout->lhs.cols(), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(problem.evaluate(eta, noise, &lag, gradient));
  state.SetItemsProcessed(state.iterations() * 20 * 1024);
}
BENCHMARK(BM_Evaluate)->ArgsProduct({{2, 3, 5}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_DrawNoise(benchmark::State& state) {
  const Fixture f(2, 20, 1024);
  const Problem problem(f.layout, f.basis, 0.0);
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(problem.draw_noise(rng));
}
BENCHMARK(BM_DrawNoise)->Unit(benchmark::kMicrosecond);

void BM_SampleThetaGivenBin(benchmark::State& state) {
  const int b = static_cast<int>(state.range(0));
  Eigen::VectorXd row = Eigen::VectorXd::LinSpaced(b, -2.0, 2.0);
  EtaParams eta = EtaParams::standard(3);
  eta.chol(1, 0) = 0.4;
  eta.chol(3, 2) = -0.2;
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(sample_theta_given_bin(eta, row, rng));
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(BM_SampleThetaGivenBin)->Arg(1024)->Arg(10000);

void BM_SmoothLhs(benchmark::State& state) {
  Eigen::MatrixXd lhs(20, 2);
  for (int m = 0; m < 20; ++m) lhs.row(m) << std::sin(0.4 * m) + 0.1 * (m % 3), 0.05 * m * m;
  for (auto _ : state) benchmark::DoNotOptimize(smooth_lhs(lhs));
}
BENCHMARK(BM_SmoothLhs);

void BM_SolveBoundShort(benchmark::State& state) {
  const Fixture f(2, 20, 1024);
  SolverConfig c;
  c.rounds = 5;
  c.eps_rel_schedule = {0.05};
  const ProblemSetup setup = prepare_problem(f.data, f.basis, c);
  for (auto _ : state) benchmark::DoNotOptimize(solve_bound(setup, 0.0, Sense::lower, 0.05, c, 7));
}
BENCHMARK(BM_SolveBoundShort)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
