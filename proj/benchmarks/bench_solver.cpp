#include <benchmark/benchmark.h>

#include <random>

#include "conelq/cone.hpp"
#include "conelq/riccati.hpp"
#include "conelq/simulate.hpp"

using namespace conelq;

namespace {

ProblemSpec golden() {
    ProblemSpec spec;
    spec.gen.ell = 1;
    spec.gen.rates = MatrixXd::Zero(1, 1);
    spec.coeffs.m = spec.coeffs.n = 1;
    spec.coeffs.breakpoints = {0.0};
    CoefficientCell c;
    c.A = -1.0;
    c.B = VectorXd::Constant(1, 1.0);
    c.C = VectorXd::Constant(1, 1.0);
    c.D = MatrixXd::Zero(1, 1);
    c.Q = 1.0;
    c.R = MatrixXd::Constant(1, 1, 1.0);
    spec.coeffs.cells = {{c}};
    spec.x0 = 1.0;
    return spec;
}

CoefficientCell bench_cell(int m, int n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    CoefficientCell c;
    c.A = -1.0;
    c.B = VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) c.B(i) = normal(rng);
    c.C = VectorXd::Zero(n);
    c.D = MatrixXd::Zero(n, m);
    for (int r = 0; r < n; ++r)
        for (int col = 0; col < m; ++col) c.D(r, col) = 0.5 * normal(rng);
    c.Q = 1.0;
    c.R = MatrixXd::Identity(m, m);
    return c;
}

void BM_hamiltonian_orthant(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    std::mt19937_64 rng(7);
    const CoefficientCell c = bench_cell(m, m, rng);
    const ConstraintCone cone = ConstraintCone::orthant();
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval_hamiltonian(Branch::Minus, 0.7, c, cone, 0.0).value);
    }
}
BENCHMARK(BM_hamiltonian_orthant)->Arg(1)->Arg(2)->Arg(4);

void BM_cone_projection_generated(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd g(m, m + 1);
    for (int j = 0; j < g.cols(); ++j)
        for (int r = 0; r < m; ++r) g(r, j) = normal(rng);
    const ConstraintCone cone = ConstraintCone::generated(g);
    VectorXd p(m);
    for (int r = 0; r < m; ++r) p(r) = normal(rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(project_cone(cone, p));
    }
}
BENCHMARK(BM_cone_projection_generated)->Arg(2)->Arg(4);

void BM_finite_horizon(benchmark::State& state) {
    const ProblemSpec spec = golden();
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            integrate_finite_horizon(spec, 20.0, 0.0, Branch::Plus, 1e-2).P(0, 0));
    }
}
BENCHMARK(BM_finite_horizon)->Unit(benchmark::kMillisecond);

void BM_infinite_solve(benchmark::State& state) {
    const ProblemSpec spec = golden();
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_infinite(spec).P1(0, 0));
    }
}
BENCHMARK(BM_infinite_solve)->Unit(benchmark::kMillisecond);

void BM_simulate_paths(benchmark::State& state) {
    const ProblemSpec spec = golden();
    const RiccatiSolution sol = solve_infinite(spec);
    const FeedbackPolicy policy = build_policy(spec, sol);
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.T = 2.0;
    cfg.paths = state.range(0);
    cfg.seed = 3;
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_cost(spec, policy, cfg).mean);
    }
}
BENCHMARK(BM_simulate_paths)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_regime_path(benchmark::State& state) {
    RegimeGenerator gen;
    gen.ell = 3;
    gen.rates = MatrixXd(3, 3);
    gen.rates << -1.0, 0.6, 0.4, 0.5, -1.2, 0.7, 0.3, 0.2, -0.5;
    std::mt19937_64 rng(13);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_regime_path(gen, 0, 40.0, 1e-3, rng).size());
    }
}
BENCHMARK(BM_regime_path);

}  // namespace

BENCHMARK_MAIN();
