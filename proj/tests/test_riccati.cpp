#include <sstream>

#include "doctest.h"
#include "support.hpp"

using namespace conelq;
using testsupport::golden_root;
using testsupport::golden_spec;
using testsupport::scalar_spec;

TEST_CASE("zero state weight keeps the curves at zero") {
    const ProblemSpec spec = scalar_spec(-1.0, 1.0, 1.0, 0.0, 0.0, 1.0);
    const Curves c = integrate_finite_horizon(spec, 5.0, 0.0, Branch::Plus, 1e-2);
    CHECK(c.P.cwiseAbs().maxCoeff() == 0.0);

    const RiccatiSolution sol = solve_infinite(spec);
    CHECK(sol.P1.cwiseAbs().maxCoeff() == 0.0);
    CHECK(sol.P2.cwiseAbs().maxCoeff() == 0.0);
    CHECK(sol.diag.horizon_rounds == 1);
}

TEST_CASE("zero cone reduces to the linear scalar flow") {
    // H vanishes on {0}: dP/dt = -(k P + Q) with k = -1 gives 1 - exp(-(N-t))
    ProblemSpec spec = scalar_spec(-0.5, 1.0, 0.0, 0.0, 1.0, 1.0,
                                   ConstraintCone::generated(MatrixXd(1, 0)));
    const double N = 6.0;
    const Curves c = integrate_finite_horizon(spec, N, 0.0, Branch::Plus, 1e-2);
    for (std::size_t k = 0; k < c.grid.size(); ++k) {
        const double expected = 1.0 - std::exp(-(N - c.grid[k]));
        CHECK(c.P(static_cast<Eigen::Index>(k), 0) ==
              doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("long-horizon scalar flow reaches the golden root") {
    // A = -0.5, C = 0, B = Q = R = 1, D = 0
    const ProblemSpec spec = scalar_spec(-0.5, 1.0, 0.0, 0.0, 1.0, 1.0);
    const Curves c = integrate_finite_horizon(spec, 40.0, 0.0, Branch::Plus, 1e-2);
    CHECK(std::abs(c.P(0, 0) - golden_root()) <= 1e-6);
}

TEST_CASE("infinite-horizon solve hits the golden root on both branches") {
    const RiccatiSolution sol = solve_infinite(golden_spec());
    CHECK(std::abs(sol.P1(0, 0) - golden_root()) <= 1e-6);
    CHECK(std::abs(sol.P2(0, 0) - golden_root()) <= 1e-6);
    CHECK(sol.kind == ProblemCase::Standard);
    CHECK(sol.a_final == 0.0);
    CHECK(sol.diag.min_value >= -1e-9);
    CHECK(sol.diag.max_value <= sol.report.p_upper + 1e-6);
    CHECK(sol.diag.side_condition_min > 0.0);
}

TEST_CASE("step halving shows fourth-order convergence") {
    const ProblemSpec spec = golden_spec();
    auto at_step = [&](double h) {
        return integrate_finite_horizon(spec, 10.0, 0.0, Branch::Plus, h).P(0, 0);
    };
    const double p1 = at_step(0.2), p2 = at_step(0.1), p3 = at_step(0.05);
    const double d1 = std::abs(p2 - p1), d2 = std::abs(p3 - p2);
    if (d1 > 1e-13) CHECK(d2 <= d1 / 10.0);
}

TEST_CASE("algebraic roots match the monotone limit and avoid the negative root") {
    const ProblemSpec spec = golden_spec();
    const RiccatiSolution sol = solve_infinite(spec);
    const AlgebraicRoots roots = solve_algebraic(spec, sol);
    CHECK(std::abs(roots.P1(0) - golden_root()) <= 1e-10);
    CHECK(std::abs(roots.P2(0) - golden_root()) <= 1e-10);
    CHECK(roots.residual <= 1e-10);
    CHECK(roots.P1(0) > 0.0);  // never the negative branch -(1+sqrt 5)/2
}

TEST_CASE("algebraic polish nails the two-regime tracking system") {
    const MarketSpec market = testsupport::two_regime_market();
    const ProblemSpec spec = to_lq(market);
    const RiccatiSolution sol = solve_infinite(spec);
    const AlgebraicRoots roots = solve_algebraic(spec, sol);
    const Eigen::Vector2d expected = closed_form_two_regime(market);
    CHECK(std::abs(roots.P1(0) - expected(0)) <= 1e-10);
    CHECK(std::abs(roots.P1(1) - expected(1)) <= 1e-10);
    CHECK(std::abs(roots.P2(0) - expected(0)) <= 1e-10);
    CHECK(std::abs(roots.P2(1) - expected(1)) <= 1e-10);
}

TEST_CASE("the singular case refuses an unregularized finite-horizon solve") {
    std::mt19937_64 rng(97);
    const ProblemSpec spec = testsupport::random_singular(rng, 1, 1, 1);
    REQUIRE(check_assumptions(spec).kind == ProblemCase::Singular);
    try {
        integrate_finite_horizon(spec, 5.0, 0.0, Branch::Plus, 1e-2);
        FAIL("expected PreconditionViolated");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::PreconditionViolated);
    }
}

TEST_CASE("algebraic solve on a zero state weight returns zero") {
    const ProblemSpec spec = scalar_spec(-1.0, 1.0, 1.0, 0.0, 0.0, 1.0);
    const RiccatiSolution sol = solve_infinite(spec);
    const AlgebraicRoots roots = solve_algebraic(spec, sol);
    CHECK(std::abs(roots.P1(0)) <= 1e-12);
    CHECK(std::abs(roots.P2(0)) <= 1e-12);
}

TEST_CASE("algebraic residual of the infinite-horizon values stays small") {
    std::mt19937_64 rng(41);
    for (int k = 0; k < 3; ++k) {
        const ProblemSpec spec = testsupport::random_standard(rng, 2, 2, 2);
        SolverConfig cfg;
        const RiccatiSolution sol = solve_infinite(spec, cfg);

        const int ell = spec.gen.ell;
        double worst = 0.0;
        for (Branch branch : {Branch::Plus, Branch::Minus}) {
            const MatrixXd& P = branch == Branch::Plus ? sol.P1 : sol.P2;
            for (int i = 0; i < ell; ++i) {
                const CoefficientCell& c = spec.coeffs.cells[static_cast<std::size_t>(i)][0];
                const double h_val =
                    eval_hamiltonian(branch, P(0, i), c, spec.cone, 0.0).value;
                double res = (2.0 * c.A + c.C.squaredNorm()) * P(0, i) + c.Q + h_val;
                for (int j = 0; j < ell; ++j) res += spec.gen.rates(i, j) * P(0, j);
                worst = std::max(worst, std::abs(res));
            }
        }
        CHECK(worst < 10.0 * cfg.horizon_tol);
    }
}

TEST_CASE("value function combines the positive and negative branches") {
    const RiccatiSolution sol = solve_infinite(golden_spec());
    CHECK(value_function(sol, 0.0, 0) == 0.0);
    CHECK(value_function(sol, -1.0, 0) == doctest::Approx(golden_root()).epsilon(1e-6));
    CHECK(value_function(sol, 2.0, 0) == doctest::Approx(4.0 * sol.P1(0, 0)));
}

TEST_CASE("monotone ladders pass on the golden instance") {
    const MonotonicityReport rep = check_monotonicity(golden_spec());
    CHECK(rep.horizon_margin <= 1e-8);
    CHECK(rep.horizons.size() == 3);
}

TEST_CASE("monotone ladders pass on singular instances including the a ladder") {
    std::mt19937_64 rng(43);
    const ProblemSpec spec = testsupport::random_singular(rng, 2, 1, 1);
    REQUIRE(check_assumptions(spec).kind == ProblemCase::Singular);
    const MonotonicityReport rep = check_monotonicity(spec);
    CHECK(rep.horizon_margin <= 1e-8);
    CHECK(rep.reg_margin <= 1e-8);
    CHECK(rep.a_values.size() == 4);
}

TEST_CASE("positivity check demands a uniformly positive state weight") {
    const RiccatiSolution sol = solve_infinite(golden_spec());
    const PositivityReport rep = check_positivity(golden_spec(), sol);
    CHECK(rep.min_value > 0.0);

    const ProblemSpec no_weight = scalar_spec(-1.0, 1.0, 1.0, 0.0, 0.0, 1.0);
    const RiccatiSolution zero_sol = solve_infinite(no_weight);
    CHECK_THROWS_AS(check_positivity(no_weight, zero_sol), Error);
}

TEST_CASE("singular solutions respect the exponential lower envelope") {
    std::mt19937_64 rng(47);
    const ProblemSpec spec = testsupport::random_singular(rng, 2, 1, 2);
    REQUIRE(check_assumptions(spec).kind == ProblemCase::Singular);
    const RiccatiSolution sol = solve_infinite(spec);
    const PositivityReport rep = check_positivity(spec, sol);
    CHECK(rep.min_value > 0.0);
    CHECK(rep.envelope_margin <= 1e-8);
    CHECK(rep.c4 > 0.0);
}

TEST_CASE("symmetric cones collapse the two branches") {
    std::mt19937_64 rng(53);
    for (int k = 0; k < 3; ++k) {
        ProblemSpec spec = testsupport::random_standard(rng, 2, 2, 2);
        spec.cone = ConstraintCone::full_space();
        const RiccatiSolution sol = solve_infinite(spec);
        CHECK((sol.P1 - sol.P2).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("decoupled regimes solve like independent scalars") {
    std::mt19937_64 rng(59);
    ProblemSpec spec = testsupport::random_standard(rng, 3, 1, 1);
    spec.gen.rates.setZero();
    const RiccatiSolution joint = solve_infinite(spec);

    for (int i = 0; i < 3; ++i) {
        ProblemSpec single = spec;
        single.gen.ell = 1;
        single.gen.rates = MatrixXd::Zero(1, 1);
        single.coeffs.cells = {spec.coeffs.cells[static_cast<std::size_t>(i)]};
        single.i0 = 0;
        const RiccatiSolution alone = solve_infinite(single);
        CHECK((joint.P1.col(i) - alone.P1.col(0)).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((joint.P2.col(i) - alone.P2.col(0)).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("piecewise coefficients align the grid with breakpoints") {
    ProblemSpec spec = golden_spec();
    spec.coeffs.breakpoints = {0.0, 0.37};
    CoefficientCell late = spec.coeffs.cells[0][0];
    late.A = -0.8;
    spec.coeffs.cells[0].push_back(late);

    const std::vector<double> grid = integration_grid(
        spec, 1e-2, snap_horizon(spec, 1e-2, 2.0));
    CHECK(std::find(grid.begin(), grid.end(), 0.37) != grid.end());

    const RiccatiSolution sol = solve_infinite(spec);
    CHECK(sol.P1(0, 0) > 0.0);
}

TEST_CASE("oversized steps are rejected rather than integrated") {
    try {
        integrate_finite_horizon(golden_spec(), 10.0, 0.0, Branch::Plus, 5.0);
        FAIL("expected StepTooLarge");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::StepTooLarge);
    }
}

TEST_CASE("horizon loop reports the last increment when capped") {
    SolverConfig cfg;
    cfg.horizon0 = 0.5;
    cfg.horizon_tol = 1e-13;
    cfg.max_rounds = 1;
    try {
        solve_infinite(golden_spec(), cfg);
        FAIL("expected MaxRoundsExceeded");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MaxRoundsExceeded);
        CHECK(std::string(e.what()).find("increment") != std::string::npos);
    }
}

TEST_CASE("csv export emits one row per grid point per regime") {
    const RiccatiSolution sol = solve_infinite(golden_spec());
    std::ostringstream os;
    write_solution_csv(sol, os);
    const std::string text = os.str();
    CHECK(text.rfind("t,regime,P1,P2\n", 0) == 0);
    const auto rows = static_cast<std::size_t>(
        std::count(text.begin(), text.end(), '\n'));
    CHECK(rows == sol.grid.size() * static_cast<std::size_t>(sol.P1.cols()) + 1);
}
