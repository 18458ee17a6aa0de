#include <random>

#include <benchmark/benchmark.h>

#include "kwc/scheme.hpp"

namespace {

using namespace kwc;

struct Setup {
  ModelParams params;
  Mesh mesh;
  FieldPair eta, theta;
};

// Grain-like data: theta a smoothed step in x, eta dipped along the interfaces.
Setup make_setup(int nx) {
  ModelParams p;
  p.grid = {Geometry::periodic_strip, nx, nx / 2, 1.0, 0.5};
  Mesh m = build_mesh(p.grid);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> noise(0.0, 0.05);
  Field eta(m.num_nodes()), theta(m.num_nodes());
  for (int i = 0; i < m.num_nodes(); ++i) {
    const double d = std::min(std::abs(m.x(i) - 0.25), std::abs(m.x(i) - 0.75));
    theta[i] = (m.x(i) > 0.25 && m.x(i) < 0.75 ? 0.9 : 0.1) + noise(rng);
    eta[i] = 1.0 - 0.8 * std::exp(-d * d * 800.0) - noise(rng);
  }
  return {p, std::move(m), FieldPair(eta), FieldPair(theta)};
}

void theta_step_bench(benchmark::State& state, ThetaMethod method, LinearSolver solver) {
  const Setup s = make_setup(static_cast<int>(state.range(0)));
  SolverOptions opts;
  opts.theta_method = method;
  opts.linear_solver = solver;
  opts.max_outer = 2000;
  for (auto _ : state) benchmark::DoNotOptimize(theta_step(s.mesh, s.params, s.eta, s.theta, opts));
  state.SetComplexityN(s.mesh.num_nodes());
}

void eta_step_bench(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(eta_step(s.mesh, s.params, s.eta, s.theta));
  state.SetComplexityN(s.mesh.num_nodes());
}

void full_step_bench(benchmark::State& state) {
  const Setup s = make_setup(static_cast<int>(state.range(0)));
  State initial{s.eta, s.theta};
  for (auto _ : state) benchmark::DoNotOptimize(run_scheme(s.mesh, s.params, initial, 1));
}

BENCHMARK_CAPTURE(theta_step_bench, hybrid_cg, ThetaMethod::hybrid, LinearSolver::cg)->RangeMultiplier(2)->Range(16, 128);
BENCHMARK_CAPTURE(theta_step_bench, hybrid_direct, ThetaMethod::hybrid, LinearSolver::direct)
    ->RangeMultiplier(2)
    ->Range(16, 128);
BENCHMARK_CAPTURE(theta_step_bench, lagged_cg, ThetaMethod::lagged_diffusivity, LinearSolver::cg)
    ->RangeMultiplier(2)
    ->Range(16, 64);
BENCHMARK(eta_step_bench)->RangeMultiplier(2)->Range(16, 128);
BENCHMARK(full_step_bench)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
