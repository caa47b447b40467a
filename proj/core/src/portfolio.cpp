#include "conelq/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace conelq {

void validate_market(const MarketSpec& market) {
    validate_generator(market.gen);
    if (market.m < 1 || market.n < market.m)
        fail(Errc::BadInput, "market needs 1 <= m <= n");
    if (market.lambda < 0.0) fail(Errc::BadInput, "lambda must be nonnegative");
    if (static_cast<int>(market.cells.size()) != market.gen.ell)
        fail(Errc::BadInput, "market regime count does not match the generator");
    if (market.breakpoints.empty() || market.breakpoints.front() != 0.0)
        fail(Errc::BadInput, "breakpoints must start at 0");
    for (const auto& regime : market.cells) {
        if (regime.size() != market.breakpoints.size())
            fail(Errc::BadInput, "market segment count does not match breakpoints");
        for (const auto& c : regime) {
            if (c.mu.size() != market.m || c.sigma.rows() != market.m ||
                c.sigma.cols() != market.n)
                fail(Errc::BadInput, "market cell has inconsistent dimensions");
            if (!std::isfinite(c.r) || !std::isfinite(c.rho) || !c.mu.allFinite() ||
                !c.sigma.allFinite())
                fail(Errc::BadInput, "non-finite market entry");
        }
    }
    if (market.i0 < 0 || market.i0 >= market.gen.ell)
        fail(Errc::BadInput, "initial regime out of range");
}

ProblemSpec to_lq(const MarketSpec& market) {
    validate_market(market);

    double min_gap = std::numeric_limits<double>::infinity();
    for (const auto& regime : market.cells)
        for (const auto& c : regime) min_gap = std::min(min_gap, c.rho - c.r);
    if (!(min_gap > 0.0))
        fail(Errc::IllPosed,
             "discount rate must exceed the interest rate uniformly (gap " +
                 std::to_string(min_gap) + ")");

    ProblemSpec spec;
    spec.gen = market.gen;
    spec.cone = market.cone;
    spec.x0 = market.x0 - market.d;
    spec.i0 = market.i0;
    spec.coeffs.m = market.m;
    spec.coeffs.n = market.n;
    spec.coeffs.breakpoints = market.breakpoints;
    spec.coeffs.cells.resize(market.cells.size());
    for (std::size_t i = 0; i < market.cells.size(); ++i) {
        for (const auto& mc : market.cells[i]) {
            CoefficientCell c;
            c.A = mc.r - mc.rho;
            c.B = mc.mu - mc.r * VectorXd::Ones(market.m);
            c.C = VectorXd::Zero(market.n);
            c.D = mc.sigma.transpose();
            c.Q = 1.0;
            c.R = market.lambda * MatrixXd::Identity(market.m, market.m);
            spec.coeffs.cells[i].push_back(std::move(c));
        }
    }
    validate_spec(spec);
    return spec;
}

namespace {

bool constant_coefficients(const MarketSpec& market) {
    return market.breakpoints.size() == 1;
}

}  // namespace

double closed_form_single(const MarketSpec& market) {
    validate_market(market);
    if (market.m != 1 || market.n != 1 || market.gen.ell != 1 ||
        !constant_coefficients(market) || market.lambda != 0.0 ||
        market.cone.kind != ConstraintCone::Kind::NonnegativeOrthant)
        fail(Errc::PreconditionViolated,
             "closed form needs m = n = 1, one regime, constants, lambda = 0, "
             "orthant cone");

    const MarketCell& c = market.cells[0][0];
    const double b = c.mu(0) - c.r;
    const double b_plus = std::max(b, 0.0);
    const double s2 = c.sigma(0, 0) * c.sigma(0, 0);
    return 1.0 / (2.0 * (c.rho - c.r) + b_plus * b_plus / s2);
}

Eigen::Vector2d closed_form_two_regime(const MarketSpec& market) {
    validate_market(market);
    bool ok = market.m == 1 && market.n == 1 && market.gen.ell == 2 &&
              constant_coefficients(market) && market.lambda == 0.0 &&
              market.cone.kind == ConstraintCone::Kind::FullSpace;
    if (ok)
        for (const auto& regime : market.cells)
            for (const auto& c : regime) ok = ok && c.r == 0.0;
    if (!ok)
        fail(Errc::PreconditionViolated,
             "closed form needs m = n = 1, two regimes, constants, r = 0, "
             "lambda = 0, unconstrained cone");

    auto diag = [&](int i) {
        const MarketCell& c = market.cells[static_cast<std::size_t>(i)][0];
        const double b = c.mu(0);
        const double s2 = c.sigma(0, 0) * c.sigma(0, 0);
        return 2.0 * c.rho + b * b / s2 - market.gen.rates(i, i);
    };

    Eigen::Matrix2d M;
    M << diag(0), -market.gen.rates(0, 1), -market.gen.rates(1, 0), diag(1);
    const double det = M.determinant();
    if (!(det > 0.0)) fail(Errc::SingularSystem, "tracking system matrix is singular");

    Eigen::Vector2d p = M.inverse() * Eigen::Vector2d::Ones();
    if (!(p(0) > 0.0 && p(1) > 0.0))
        fail(Errc::SingularSystem, "tracking system produced a nonpositive solution");
    return p;
}

TrackingSolution track(const MarketSpec& market, const SolverConfig& config) {
    TrackingSolution out;
    const ProblemSpec spec = to_lq(market);
    out.lq = solve_infinite(spec, config);
    out.P2_0 = out.lq.P2.row(0).transpose();
    out.policy = build_policy(spec, out.lq);
    out.x0_above_target = market.x0 >= market.d;
    return out;
}

VectorXd optimal_portfolio(const TrackingSolution& track, const MarketSpec& market,
                           double t, double wealth, int regime, double growth_factor,
                           double discount_factor) {
    if (regime < 0 || regime >= market.gen.ell)
        fail(Errc::PreconditionViolated, "regime index out of range");
    const int k = track.policy.lookup(t);
    const VectorXd gain =
        track.policy.neg_gain[static_cast<std::size_t>(regime)].row(k).transpose();
    const double shortfall = wealth - market.d * growth_factor;
    return -gain * shortfall * discount_factor;
}

double tracking_value(const TrackingSolution& track, const MarketSpec& market) {
    // P2 carries the value for x0 <= d; the positive branch covers x0 > d
    return value_function(track.lq, market.x0 - market.d, market.i0);
}

}  // namespace conelq
