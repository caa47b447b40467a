#pragma once

#include <random>

#include "conelq/json_io.hpp"
#include "conelq/portfolio.hpp"
#include "conelq/riccati.hpp"
#include "conelq/simulate.hpp"

namespace testsupport {

using namespace conelq;

inline ProblemSpec scalar_spec(double A, double B, double C, double D, double Q, double R,
                               ConstraintCone cone = ConstraintCone::full_space(),
                               double x0 = 1.0) {
    ProblemSpec spec;
    spec.gen.ell = 1;
    spec.gen.rates = MatrixXd::Zero(1, 1);
    spec.coeffs.m = 1;
    spec.coeffs.n = 1;
    spec.coeffs.breakpoints = {0.0};
    CoefficientCell cell;
    cell.A = A;
    cell.B = VectorXd::Constant(1, B);
    cell.C = VectorXd::Constant(1, C);
    cell.D = MatrixXd::Constant(1, 1, D);
    cell.Q = Q;
    cell.R = MatrixXd::Constant(1, 1, R);
    spec.coeffs.cells = {{cell}};
    spec.cone = std::move(cone);
    spec.x0 = x0;
    spec.i0 = 0;
    return spec;
}

/// 2A + C'C = -1, B = Q = R = 1, D = 0, unconstrained: the nonnegative
/// stationary root is (sqrt(5) - 1) / 2.
inline ProblemSpec golden_spec() { return scalar_spec(-1.0, 1.0, 1.0, 0.0, 1.0, 1.0); }

inline double golden_root() { return (std::sqrt(5.0) - 1.0) / 2.0; }

inline MarketCell market_cell(double r, double mu, double sigma, double rho) {
    MarketCell c;
    c.r = r;
    c.mu = VectorXd::Constant(1, mu);
    c.sigma = MatrixXd::Constant(1, 1, sigma);
    c.rho = rho;
    return c;
}

/// Single-regime tracking market: rho = 0.05, r = 0.01, b = 0.3, sigma = 0.2,
/// lambda = 0, no-shorting cone. Closed form P2 = 1 / (2(rho-r) + (b+)^2/s^2).
inline MarketSpec single_market(double x0 = 0.0, double d = 1.0) {
    MarketSpec market;
    market.m = market.n = 1;
    market.gen.ell = 1;
    market.gen.rates = MatrixXd::Zero(1, 1);
    market.breakpoints = {0.0};
    market.cells = {{market_cell(0.01, 0.31, 0.2, 0.05)}};
    market.lambda = 0.0;
    market.d = d;
    market.cone = ConstraintCone::orthant();
    market.x0 = x0;
    market.i0 = 0;
    return market;
}

/// Two-regime unconstrained market with r = 0: rho = (0.05, 0.05),
/// b = (0.3, 0.1), sigma = 0.2, symmetric switching at rate 1.
inline MarketSpec two_regime_market() {
    MarketSpec market;
    market.m = market.n = 1;
    market.gen.ell = 2;
    market.gen.rates = MatrixXd(2, 2);
    market.gen.rates << -1.0, 1.0, 1.0, -1.0;
    market.breakpoints = {0.0};
    market.cells = {{market_cell(0.0, 0.3, 0.2, 0.05)},
                    {market_cell(0.0, 0.1, 0.2, 0.05)}};
    market.lambda = 0.0;
    market.d = 1.0;
    market.cone = ConstraintCone::full_space();
    market.x0 = 0.0;
    market.i0 = 0;
    return market;
}

/// Fast decay on [0, 0.5), golden dynamics after. A truncation horizon
/// ending inside the fast segment makes the fitted-decay tail bound
/// under-cover, so the Monte Carlo value check genuinely fails.
inline ProblemSpec fast_then_slow_spec() {
    ProblemSpec spec = golden_spec();
    spec.coeffs.breakpoints = {0.0, 0.5};
    CoefficientCell fast = spec.coeffs.cells[0][0];
    fast.A = -3.0;
    spec.coeffs.cells[0] = {fast, spec.coeffs.cells[0][0]};
    return spec;
}

inline RegimeGenerator random_generator(std::mt19937_64& rng, int ell) {
    std::uniform_real_distribution<double> rate(0.0, 0.8);
    RegimeGenerator gen;
    gen.ell = ell;
    gen.rates = MatrixXd::Zero(ell, ell);
    for (int i = 0; i < ell; ++i) {
        double sum = 0.0;
        for (int j = 0; j < ell; ++j) {
            if (i == j) continue;
            gen.rates(i, j) = rate(rng);
            sum += gen.rates(i, j);
        }
        gen.rates(i, i) = -sum;
    }
    return gen;
}

inline ConstraintCone random_generated_cone(std::mt19937_64& rng, int m, int k) {
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd g(m, k);
    for (int j = 0; j < k; ++j) {
        for (;;) {
            VectorXd v(m);
            for (int c = 0; c < m; ++c) v(c) = normal(rng);
            if (v.norm() < 1e-3) continue;
            v.normalize();
            // in dimension one every pair is parallel; skip the conditioning guard
            bool near_parallel = false;
            if (m > 1)
                for (int prev = 0; prev < j; ++prev)
                    if (std::abs(v.dot(g.col(prev))) > 0.98) near_parallel = true;
            if (near_parallel) continue;
            g.col(j) = v;
            break;
        }
    }
    return ConstraintCone::generated(g);
}

inline ConstraintCone random_cone(std::mt19937_64& rng, int m) {
    std::uniform_int_distribution<int> pick(0, 2);
    switch (pick(rng)) {
        case 0: return ConstraintCone::full_space();
        case 1: return ConstraintCone::orthant();
        default: return random_generated_cone(rng, m, std::min(m + 1, 3));
    }
}

/// Standard-case cell with 2A + C'C <= -rho for the supplied margin.
inline CoefficientCell random_standard_cell(std::mt19937_64& rng, int m, int n,
                                            double rho) {
    std::uniform_real_distribution<double> unif(-0.8, 0.8);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    CoefficientCell cell;
    cell.C = VectorXd::Zero(n);
    for (int c = 0; c < n; ++c) cell.C(c) = 0.4 * unif(rng);
    cell.A = -(rho + cell.C.squaredNorm() + 0.3 * pos(rng)) / 2.0;
    cell.B = VectorXd::Zero(m);
    for (int c = 0; c < m; ++c) cell.B(c) = unif(rng);
    cell.D = MatrixXd::Zero(n, m);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < m; ++c) cell.D(r, c) = 0.6 * unif(rng);
    cell.Q = pos(rng);
    VectorXd v(m);
    for (int c = 0; c < m; ++c) v(c) = unif(rng);
    cell.R = (0.4 + 0.8 * pos(rng)) * MatrixXd::Identity(m, m) + 0.3 * v * v.transpose();
    return cell;
}

inline ProblemSpec random_standard(std::mt19937_64& rng, int ell, int m, int n,
                                   bool two_segments = false) {
    std::uniform_real_distribution<double> rho_pick(0.8, 1.5);
    const double rho = rho_pick(rng);
    ProblemSpec spec;
    spec.gen = random_generator(rng, ell);
    spec.coeffs.m = m;
    spec.coeffs.n = n;
    spec.coeffs.breakpoints = two_segments ? std::vector<double>{0.0, 1.0}
                                           : std::vector<double>{0.0};
    spec.coeffs.cells.resize(static_cast<std::size_t>(ell));
    for (int i = 0; i < ell; ++i)
        for (std::size_t s = 0; s < spec.coeffs.breakpoints.size(); ++s)
            spec.coeffs.cells[static_cast<std::size_t>(i)].push_back(
                random_standard_cell(rng, m, n, rho));
    spec.cone = random_cone(rng, m);
    spec.x0 = 1.0;
    spec.i0 = 0;
    return spec;
}

/// Singular-case cell: R = 0, D'D uniformly positive, Q >= delta.
inline CoefficientCell random_singular_cell(std::mt19937_64& rng, int m, int n,
                                            double rho) {
    std::uniform_real_distribution<double> unif(-0.8, 0.8);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    CoefficientCell cell;
    cell.C = VectorXd::Zero(n);
    for (int c = 0; c < n; ++c) cell.C(c) = 0.3 * unif(rng);
    cell.A = -(rho + cell.C.squaredNorm() + 0.3 * pos(rng)) / 2.0;
    cell.B = VectorXd::Zero(m);
    for (int c = 0; c < m; ++c) cell.B(c) = unif(rng);
    cell.D = MatrixXd::Zero(n, m);
    for (int c = 0; c < m; ++c) cell.D(c, c) = 0.7 + 0.3 * pos(rng);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < m; ++c) cell.D(r, c) += 0.05 * unif(rng);
    cell.Q = 0.3 + 0.7 * pos(rng);
    cell.R = MatrixXd::Zero(m, m);
    return cell;
}

inline ProblemSpec random_singular(std::mt19937_64& rng, int ell, int m, int n) {
    std::uniform_real_distribution<double> rho_pick(0.8, 1.5);
    const double rho = rho_pick(rng);
    ProblemSpec spec;
    spec.gen = random_generator(rng, ell);
    spec.coeffs.m = m;
    spec.coeffs.n = n;
    spec.coeffs.breakpoints = {0.0};
    spec.coeffs.cells.resize(static_cast<std::size_t>(ell));
    for (int i = 0; i < ell; ++i)
        spec.coeffs.cells[static_cast<std::size_t>(i)].push_back(
            random_singular_cell(rng, m, n, rho));
    std::uniform_int_distribution<int> pick(0, 1);
    spec.cone = pick(rng) == 0 ? ConstraintCone::orthant() : ConstraintCone::full_space();
    spec.x0 = 1.0;
    spec.i0 = 0;
    return spec;
}

}  // namespace testsupport
