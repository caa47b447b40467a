#include "doctest.h"
#include "support.hpp"

using namespace conelq;
using testsupport::market_cell;
using testsupport::single_market;
using testsupport::two_regime_market;

TEST_CASE("the tracking change of variables produces the expected instance") {
    const MarketSpec market = single_market(0.0, 1.0);
    const ProblemSpec spec = to_lq(market);

    const CoefficientCell& c = spec.coeffs.cells[0][0];
    CHECK(c.A == doctest::Approx(-0.04));             // r - rho
    CHECK(c.B(0) == doctest::Approx(0.3));            // mu - r
    CHECK(c.C.norm() == 0.0);
    CHECK(c.D(0, 0) == doctest::Approx(0.2));         // sigma'
    CHECK(c.Q == 1.0);
    CHECK(c.R(0, 0) == 0.0);
    CHECK(spec.x0 == doctest::Approx(-1.0));          // x0 - d

    const AssumptionReport rep = check_assumptions(spec);
    CHECK(rep.rho == doctest::Approx(0.08));          // 2(rho - r)
    CHECK(rep.kind == ProblemCase::Singular);
}

TEST_CASE("a positive control penalty makes the tracking instance standard") {
    MarketSpec market = single_market();
    market.lambda = 0.1;
    const AssumptionReport rep = check_assumptions(to_lq(market));
    CHECK(rep.kind == ProblemCase::Standard);
    CHECK(rep.delta == doctest::Approx(0.1));
}

TEST_CASE("ill-posed markets are rejected") {
    MarketSpec market = single_market();
    market.cells[0][0].rho = 0.005;  // below the interest rate
    try {
        to_lq(market);
        FAIL("expected IllPosed");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::IllPosed);
    }
}

TEST_CASE("single-regime closed form") {
    const MarketSpec market = single_market();
    // 1 / (2(rho - r) + (b+)^2 / sigma^2) = 1 / (0.08 + 2.25)
    CHECK(closed_form_single(market) == doctest::Approx(1.0 / 2.33).epsilon(1e-12));
    CHECK(closed_form_single(market) == doctest::Approx(0.42918455).epsilon(1e-7));

    MarketSpec short_drift = market;
    short_drift.cells[0][0].mu(0) = -0.29;  // b = -0.3, clipped to zero
    CHECK(closed_form_single(short_drift) == doctest::Approx(12.5).epsilon(1e-12));

    MarketSpec bad = market;
    bad.cone = ConstraintCone::full_space();
    CHECK_THROWS_AS(closed_form_single(bad), Error);
}

TEST_CASE("two-regime closed form solves the linear system") {
    const MarketSpec market = two_regime_market();
    const Eigen::Vector2d p = closed_form_two_regime(market);

    // direct Cramer oracle for M P = 1
    const double m11 = 2.0 * 0.05 + 0.09 / 0.04 + 1.0;  // 3.35
    const double m22 = 2.0 * 0.05 + 0.01 / 0.04 + 1.0;  // 1.35
    const double det = m11 * m22 - 1.0;
    CHECK(det > 0.0);
    const double p1 = (m22 + 1.0) / det;
    const double p2 = (m11 + 1.0) / det;
    CHECK(p(0) == doctest::Approx(p1).epsilon(1e-12));
    CHECK(p(1) == doctest::Approx(p2).epsilon(1e-12));

    // symmetric regimes reduce to the single-regime value
    MarketSpec sym = market;
    sym.cells[1] = sym.cells[0];
    const Eigen::Vector2d ps = closed_form_two_regime(sym);
    const double expected = 1.0 / (2.0 * 0.05 + 0.09 / 0.04);
    CHECK(ps(0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ps(1) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("the solver reproduces the single-regime closed form end to end") {
    const MarketSpec market = single_market();
    const TrackingSolution tracked = track(market);
    CHECK(std::abs(tracked.P2_0(0) - closed_form_single(market)) <= 1e-6);
    CHECK(tracked.lq.kind == ProblemCase::Singular);
    CHECK(tracked.P2_0(0) > 0.0);
    CHECK_FALSE(tracked.x0_above_target);
}

TEST_CASE("the solver reproduces the two-regime closed form end to end") {
    const MarketSpec market = two_regime_market();
    const TrackingSolution tracked = track(market);
    const Eigen::Vector2d expected = closed_form_two_regime(market);
    CHECK(std::abs(tracked.P2_0(0) - expected(0)) <= 1e-6);
    CHECK(std::abs(tracked.P2_0(1) - expected(1)) <= 1e-6);
}

TEST_CASE("optimal portfolio maps back through the change of variables") {
    MarketSpec market = single_market(0.0, 1.0);
    market.cells[0][0].r = 0.0;
    market.cells[0][0].mu(0) = 0.3;  // keep b = 0.3 with r = 0
    const TrackingSolution tracked = track(market);

    // constants, m = n = 1, lambda = 0: the gain is b+/sigma^2 = 7.5
    CHECK(tracked.policy.neg_gain[0](0, 0) == doctest::Approx(7.5).epsilon(1e-4));

    // zero shortfall means zero position
    const VectorXd flat = optimal_portfolio(tracked, market, 0.0, market.d, 0, 1.0, 1.0);
    CHECK(flat.norm() <= 1e-12);

    // X - d = -1 at t = 0: pi* = (b+/sigma^2) * 1 = 7.5
    const VectorXd pi = optimal_portfolio(tracked, market, 0.0, market.d - 1.0, 0, 1.0, 1.0);
    CHECK(pi(0) == doctest::Approx(7.5).epsilon(1e-4));

    // discounting scales the position
    const VectorXd pi_later =
        optimal_portfolio(tracked, market, 1.0, market.d - 1.0, 0, 1.0, std::exp(-0.05));
    CHECK(pi_later(0) == doctest::Approx(7.5 * std::exp(-0.05)).epsilon(1e-4));
}

TEST_CASE("below the target with a positive premium the position is long") {
    const MarketSpec market = single_market(0.2, 1.0);
    const TrackingSolution tracked = track(market);
    const VectorXd pi = optimal_portfolio(tracked, market, 0.0, market.x0, 0, 1.0, 1.0);
    CHECK(pi(0) >= 0.0);
}

TEST_CASE("the unconstrained lambda-zero gain is constant in time") {
    MarketSpec market = single_market();
    const TrackingSolution tracked = track(market);
    const auto& gain = tracked.policy.neg_gain[0];
    for (Eigen::Index k = 1; k < gain.rows(); ++k)
        CHECK(std::abs(gain(k, 0) - gain(0, 0)) <= 1e-9);
}

TEST_CASE("translating target and endowment together changes nothing") {
    const MarketSpec base = single_market(0.0, 1.0);
    MarketSpec shifted = base;
    shifted.d += 5.0;
    shifted.x0 += 5.0;

    const TrackingSolution a = track(base);
    const TrackingSolution b = track(shifted);
    CHECK((a.lq.P2 - b.lq.P2).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.lq.P1 - b.lq.P1).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < a.policy.neg_gain.size(); ++i)
        CHECK((a.policy.neg_gain[i] - b.policy.neg_gain[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(tracking_value(a, base) == tracking_value(b, shifted));
}

TEST_CASE("an endowment above the target is flagged but still solved") {
    const MarketSpec market = single_market(2.0, 1.0);
    const TrackingSolution tracked = track(market);
    CHECK(tracked.x0_above_target);
    CHECK(tracking_value(tracked, market) > 0.0);
}

TEST_CASE("market JSON round-trips") {
    const MarketSpec market = two_regime_market();
    const MarketSpec back = parse_market(market_to_json(market));
    CHECK(back.gen.ell == 2);
    CHECK(back.lambda == market.lambda);
    CHECK(back.d == market.d);
    CHECK(back.cells[0][0].mu(0) == market.cells[0][0].mu(0));
    CHECK(back.cells[1][0].sigma(0, 0) == market.cells[1][0].sigma(0, 0));
    CHECK(back.i0 == market.i0);
}
