#include "conelq/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace conelq {

namespace {

constexpr double kClampFloor = -1e-12;
constexpr double kHardFloor = -1e-9;

struct SegmentSpacing {
    std::vector<double> sub;  // spacing per segment between breakpoints
    double tail;              // spacing beyond the last breakpoint
};

SegmentSpacing canonical_spacing(const ProblemSpec& spec, double step) {
    if (!(step > 0.0)) fail(Errc::BadInput, "integration step must be positive");
    const auto& bp = spec.coeffs.breakpoints;
    SegmentSpacing sp;
    for (std::size_t j = 0; j + 1 < bp.size(); ++j) {
        const double len = bp[j + 1] - bp[j];
        const auto pieces = static_cast<long>(std::ceil(len / step - 1e-9));
        sp.sub.push_back(len / static_cast<double>(std::max(pieces, 1L)));
    }
    sp.tail = step;
    return sp;
}

/// Backward RK4 over one ell-vector system. The right-hand side is
/// autonomous within a step because coefficients are segment-constant.
class BackwardIntegrator {
public:
    BackwardIntegrator(const ProblemSpec& spec, Branch branch, double a, double p_upper)
        : spec_(spec), branch_(branch), a_(a), p_upper_(p_upper) {}

    Curves run(const std::vector<double>& grid) const {
        const int ell = spec_.gen.ell;
        const auto npts = static_cast<Eigen::Index>(grid.size());
        MatrixXd P(npts, ell);
        P.row(npts - 1).setZero();

        VectorXd state = VectorXd::Zero(ell);
        VectorXd k1(ell), k2(ell), k3(ell), k4(ell), stage(ell);
        std::vector<const CoefficientCell*> cells(static_cast<std::size_t>(ell));

        for (Eigen::Index k = npts - 1; k > 0; --k) {
            const double t_left = grid[static_cast<std::size_t>(k - 1)];
            const double h = grid[static_cast<std::size_t>(k)] - t_left;

            for (int i = 0; i < ell; ++i)
                cells[static_cast<std::size_t>(i)] = &coefficients_at(spec_, t_left, i);

            rhs(cells, state, k1);
            stage = state + 0.5 * h * k1;
            rhs(cells, stage, k2);
            stage = state + 0.5 * h * k2;
            rhs(cells, stage, k3);
            stage = state + h * k3;
            rhs(cells, stage, k4);

            VectorXd next = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

            for (int i = 0; i < ell; ++i) {
                const double change = std::abs(next(i) - state(i));
                if (p_upper_ > 0.0 && change > 0.5 * p_upper_)
                    fail(Errc::StepTooLarge,
                         "one step moved P by " + std::to_string(change) +
                             " (more than half the uniform bound); reduce the step");
                if (next(i) < kHardFloor)
                    fail(Errc::StepTooLarge,
                         "integrated curve fell to " + std::to_string(next(i)) +
                             "; the step is too coarse for this instance");
                if (next(i) < 0.0 && next(i) >= kClampFloor) next(i) = 0.0;  // roundoff
            }
            state = next;
            P.row(k - 1) = state.transpose();
        }
        return {grid, std::move(P)};
    }

private:
    void rhs(const std::vector<const CoefficientCell*>& cells, const VectorXd& P,
             VectorXd& out) const {
        const int ell = spec_.gen.ell;
        for (int i = 0; i < ell; ++i) {
            const CoefficientCell& c = *cells[static_cast<std::size_t>(i)];
            double h_val;
            try {
                h_val = hamiltonian_value(branch_, P(i), c, spec_.cone, a_);
            } catch (const Error& e) {
                if (e.code() == Errc::NotPositiveDefinite)
                    fail(Errc::SideConditionViolated,
                         std::string("side condition failed mid-integration: ") + e.what());
                throw;
            }
            out(i) = (2.0 * c.A + c.C.squaredNorm()) * P(i) + c.Q + h_val +
                     spec_.gen.rates.row(i).dot(P);
        }
    }

    const ProblemSpec& spec_;
    Branch branch_;
    double a_;
    double p_upper_;
};

struct HorizonResult {
    Curves plus;
    Curves minus;
    double horizon = 0.0;
    int rounds = 0;
    double increment = 0.0;
};

HorizonResult solve_to_horizon_limit(const ProblemSpec& spec, const SolverConfig& cfg,
                                     double n0, double a) {
    auto at = [&](double horizon) {
        return std::pair<Curves, Curves>{
            integrate_finite_horizon(spec, horizon, a, Branch::Plus, cfg.step),
            integrate_finite_horizon(spec, horizon, a, Branch::Minus, cfg.step)};
    };

    double n = n0;
    auto [cur_plus, cur_minus] = at(n);

    HorizonResult res;
    for (int round = 1;; ++round) {
        const double next_n = snap_horizon(spec, cfg.step, cfg.horizon_growth * n);
        auto [next_plus, next_minus] = at(next_n);
        const double inc =
            std::max((next_plus.P.row(0) - cur_plus.P.row(0)).cwiseAbs().maxCoeff(),
                     (next_minus.P.row(0) - cur_minus.P.row(0)).cwiseAbs().maxCoeff());
        cur_plus = std::move(next_plus);
        cur_minus = std::move(next_minus);
        n = next_n;
        if (inc < cfg.horizon_tol) {
            res.plus = std::move(cur_plus);
            res.minus = std::move(cur_minus);
            res.horizon = n;
            res.rounds = round;
            res.increment = inc;
            return res;
        }
        if (round >= cfg.max_rounds)
            fail(Errc::MaxRoundsExceeded,
                 "horizon extension did not converge; last increment " +
                     std::to_string(inc) + " at horizon " + std::to_string(n));
    }
}

}  // namespace

double snap_horizon(const ProblemSpec& spec, double step, double horizon) {
    if (!(horizon > 0.0)) fail(Errc::BadInput, "horizon must be positive");
    const auto& bp = spec.coeffs.breakpoints;
    const SegmentSpacing sp = canonical_spacing(spec, step);

    for (std::size_t j = 0; j + 1 < bp.size(); ++j) {
        if (horizon <= bp[j + 1] + 1e-12 * std::max(1.0, bp[j + 1])) {
            const double sub = sp.sub[j];
            const auto k = static_cast<long>(std::ceil((horizon - bp[j]) / sub - 1e-9));
            return bp[j] + static_cast<double>(std::max(k, 1L)) * sub;
        }
    }
    const double last = bp.back();
    const auto k = static_cast<long>(std::ceil((horizon - last) / sp.tail - 1e-9));
    return last + static_cast<double>(std::max(k, 1L)) * sp.tail;
}

std::vector<double> integration_grid(const ProblemSpec& spec, double step, double horizon) {
    const double snapped = snap_horizon(spec, step, horizon);
    if (std::abs(snapped - horizon) > 1e-9 * std::max(1.0, horizon))
        fail(Errc::BadInput, "horizon is not a canonical grid point; snap it first");

    const auto& bp = spec.coeffs.breakpoints;
    const SegmentSpacing sp = canonical_spacing(spec, step);

    std::vector<double> grid{0.0};
    const double tol = 1e-12 * std::max(1.0, horizon);
    for (std::size_t j = 0; j + 1 < bp.size() && bp[j] < horizon - tol; ++j) {
        const double seg_end = std::min(bp[j + 1], horizon);
        const auto pieces =
            static_cast<long>(std::llround((seg_end - bp[j]) / sp.sub[j]));
        for (long i = 1; i <= pieces; ++i)
            grid.push_back(bp[j] + static_cast<double>(i) * sp.sub[j]);
    }
    if (horizon > bp.back() + tol) {
        const auto pieces = static_cast<long>(std::llround((horizon - bp.back()) / sp.tail));
        for (long i = 1; i <= pieces; ++i)
            grid.push_back(bp.back() + static_cast<double>(i) * sp.tail);
    }
    if (static_cast<std::size_t>(grid.size()) > 50'000'000u)
        fail(Errc::MaxRoundsExceeded, "integration grid exceeds the size limit");
    return grid;
}

Curves integrate_finite_horizon(const ProblemSpec& spec, double horizon, double a,
                                Branch branch, double step) {
    const AssumptionReport rep = check_assumptions(spec);
    if (rep.kind == ProblemCase::Unsupported)
        fail(Errc::UnsupportedCase, "instance satisfies neither the standard nor the singular assumption");
    if (rep.kind == ProblemCase::Singular && !(a > 0.0))
        fail(Errc::PreconditionViolated, "singular case requires a positive regularization");
    if (a < 0.0) fail(Errc::PreconditionViolated, "regularization must be nonnegative");

    const std::vector<double> grid = integration_grid(spec, step, horizon);
    BackwardIntegrator integ(spec, branch, a, rep.p_upper);
    return integ.run(grid);
}

RiccatiSolution solve_infinite(const ProblemSpec& spec, const SolverConfig& config) {
    const AssumptionReport rep = check_assumptions(spec);
    if (rep.kind == ProblemCase::Unsupported)
        fail(Errc::UnsupportedCase, "instance satisfies neither the standard nor the singular assumption");
    if (!(config.horizon_growth > 1.0)) fail(Errc::BadInput, "horizon growth must exceed 1");
    if (!(config.horizon_tol > 0.0) || !(config.a_tol > 0.0))
        fail(Errc::BadInput, "tolerances must be positive");
    if (!(config.a_decay > 0.0 && config.a_decay < 1.0))
        fail(Errc::BadInput, "a_decay must lie in (0, 1)");

    const double n0_raw = config.horizon0 > 0.0 ? config.horizon0 : 10.0 / rep.rho;
    const double n0 = snap_horizon(spec, config.step, n0_raw);

    RiccatiSolution sol;
    sol.kind = rep.kind;
    sol.report = rep;

    HorizonResult hr;
    if (rep.kind == ProblemCase::Standard) {
        hr = solve_to_horizon_limit(spec, config, n0, 0.0);
        sol.a_final = 0.0;
    } else {
        double a = config.a0 > 0.0 ? config.a0 : 1e-2 * (1.0 + rep.p_upper);
        hr = solve_to_horizon_limit(spec, config, n0, a);
        for (int round = 1;; ++round) {
            const double a_next = a * config.a_decay;
            HorizonResult next = solve_to_horizon_limit(spec, config, n0, a_next);
            const double inc =
                std::max((next.plus.P.row(0) - hr.plus.P.row(0)).cwiseAbs().maxCoeff(),
                         (next.minus.P.row(0) - hr.minus.P.row(0)).cwiseAbs().maxCoeff());
            hr = std::move(next);
            a = a_next;
            sol.diag.reg_rounds = round;
            sol.diag.reg_increment = inc;
            if (inc < config.a_tol) break;
            if (round >= config.max_rounds)
                fail(Errc::MaxRoundsExceeded,
                     "regularization loop did not converge; last increment " +
                         std::to_string(inc) + " at a = " + std::to_string(a));
        }
        sol.a_final = a;
    }

    sol.diag.horizon_rounds = hr.rounds;
    sol.diag.horizon_final = hr.horizon;
    sol.diag.horizon_increment = hr.increment;

    // retain [0, n0]; canonical grids make n0 an exact grid point
    const auto& grid = hr.plus.grid;
    std::size_t keep = grid.size();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] > n0 + 1e-12 * std::max(1.0, n0)) {
            keep = k;
            break;
        }
    }
    sol.grid.assign(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(keep));
    sol.P1 = hr.plus.P.topRows(static_cast<Eigen::Index>(keep));
    sol.P2 = hr.minus.P.topRows(static_cast<Eigen::Index>(keep));

    sol.diag.min_value = std::min(sol.P1.minCoeff(), sol.P2.minCoeff());
    sol.diag.max_value = std::max(sol.P1.maxCoeff(), sol.P2.maxCoeff());

    if (sol.diag.min_value < kHardFloor)
        fail(Errc::StepTooLarge, "solution dips below the nonnegativity floor");
    if (sol.diag.max_value > rep.p_upper + 1e-6)
        fail(Errc::StepTooLarge, "solution exceeds the uniform bound c1/rho");

    double side_min = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < sol.grid.size(); ++k) {
        for (int i = 0; i < spec.gen.ell; ++i) {
            const CoefficientCell& c = coefficients_at(spec, sol.grid[k], i);
            for (const double p : {sol.P1(static_cast<Eigen::Index>(k), i),
                                   sol.P2(static_cast<Eigen::Index>(k), i)}) {
                double lam;
                if (c.R.rows() == 1) {
                    lam = p * c.D.col(0).squaredNorm() + c.R(0, 0) + sol.a_final;
                } else {
                    const MatrixXd M = p * (c.D.transpose() * c.D) + c.R +
                                       sol.a_final *
                                           MatrixXd::Identity(c.R.rows(), c.R.cols());
                    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
                    lam = es.eigenvalues().minCoeff();
                }
                side_min = std::min(side_min, lam);
            }
        }
    }
    sol.diag.side_condition_min = side_min;
    if (!(side_min > 0.0))
        fail(Errc::SideConditionViolated,
             "R + P D'D + aI lost positive definiteness on the solution grid");

    return sol;
}

AlgebraicRoots solve_algebraic(const ProblemSpec& spec, const RiccatiSolution& seed) {
    if (spec.coeffs.breakpoints.size() != 1)
        fail(Errc::PreconditionViolated,
             "algebraic solve requires constant (single-segment) coefficients");

    const int ell = spec.gen.ell;

    // The stationary system carries no regularizer; at the uniformly
    // positive seed the side condition holds with a = 0 even when R is
    // singular. Fall back to the seed's residual regularization only if
    // definiteness fails along the iteration.
    double a = 0.0;
    try {
        for (int i = 0; i < ell; ++i)
            factor_weight(seed.P1(0, i),
                          spec.coeffs.cells[static_cast<std::size_t>(i)][0], 0.0);
    } catch (const Error&) {
        a = seed.a_final;
    }

    auto residual = [&](Branch branch, const VectorXd& x) {
        VectorXd F(ell);
        for (int i = 0; i < ell; ++i) {
            const CoefficientCell& c = spec.coeffs.cells[static_cast<std::size_t>(i)][0];
            const double h_val = hamiltonian_value(branch, x(i), c, spec.cone, a);
            F(i) = (2.0 * c.A + c.C.squaredNorm()) * x(i) + c.Q + h_val +
                   spec.gen.rates.row(i).dot(x);
        }
        return F;
    };

    auto newton = [&](Branch branch, VectorXd x) {
        constexpr int kMaxIter = 60;
        constexpr double kTol = 1e-10;
        VectorXd F = residual(branch, x);
        for (int iter = 0; iter < kMaxIter; ++iter) {
            if (F.cwiseAbs().maxCoeff() < kTol) {
                if ((x.array() < -1e-12).any())
                    fail(Errc::NegativeRoot,
                         "Newton converged to a root with a negative component");
                return std::pair<VectorXd, int>{x, iter};
            }
            MatrixXd J(ell, ell);
            for (int j = 0; j < ell; ++j) {
                const double h = 1e-7 * std::max(1.0, std::abs(x(j)));
                VectorXd xp = x;
                xp(j) += h;
                J.col(j) = (residual(branch, xp) - F) / h;
            }
            VectorXd dx = J.partialPivLu().solve(-F);
            if (!dx.allFinite())
                fail(Errc::NewtonDiverged, "Newton step is not finite");
            x += dx;
            F = residual(branch, x);
            if (!F.allFinite())
                fail(Errc::NewtonDiverged, "residual is not finite");
        }
        fail(Errc::NewtonDiverged, "Newton did not reach the residual tolerance");
    };

    AlgebraicRoots roots;
    auto [p1, it1] = newton(Branch::Plus, seed.P1.row(0).transpose());
    auto [p2, it2] = newton(Branch::Minus, seed.P2.row(0).transpose());
    roots.P1 = p1;
    roots.P2 = p2;
    roots.iterations = std::max(it1, it2);
    roots.residual = std::max(residual(Branch::Plus, p1).cwiseAbs().maxCoeff(),
                              residual(Branch::Minus, p2).cwiseAbs().maxCoeff());
    return roots;
}

double value_function(const RiccatiSolution& sol, double x, int regime) {
    if (regime < 0 || regime >= sol.P1.cols())
        fail(Errc::PreconditionViolated, "regime index out of range");
    const double xp = std::max(x, 0.0);
    const double xm = std::max(-x, 0.0);
    return sol.P1(0, regime) * xp * xp + sol.P2(0, regime) * xm * xm;
}

MonotonicityReport check_monotonicity(const ProblemSpec& spec, const SolverConfig& config) {
    const AssumptionReport rep = check_assumptions(spec);
    if (rep.kind == ProblemCase::Unsupported)
        fail(Errc::UnsupportedCase, "instance satisfies neither the standard nor the singular assumption");

    const double n0_raw = config.horizon0 > 0.0 ? config.horizon0 : 10.0 / rep.rho;
    const double n0 = snap_horizon(spec, config.step, n0_raw);
    const double a_base = rep.kind == ProblemCase::Singular
                              ? (config.a0 > 0.0 ? config.a0 : 1e-2 * (1.0 + rep.p_upper))
                              : 0.0;

    MonotonicityReport out;
    out.horizons = {n0, snap_horizon(spec, config.step, config.horizon_growth * n0),
                    snap_horizon(spec, config.step,
                                 config.horizon_growth * config.horizon_growth * n0)};

    constexpr double kMargin = 1e-8;
    double worst = -std::numeric_limits<double>::infinity();
    for (Branch branch : {Branch::Plus, Branch::Minus}) {
        Curves prev;
        for (std::size_t k = 0; k < out.horizons.size(); ++k) {
            Curves cur = integrate_finite_horizon(spec, out.horizons[k], a_base, branch,
                                                  config.step);
            if (k > 0) {
                // canonical grids nest: the shorter curve is a row prefix
                const auto rows = static_cast<Eigen::Index>(prev.grid.size());
                worst = std::max(worst,
                                 (prev.P - cur.P.topRows(rows)).maxCoeff());
            }
            prev = std::move(cur);
        }
    }
    out.horizon_margin = worst;
    if (worst > kMargin)
        fail(Errc::MonotonicityViolated,
             "horizon ladder violates monotone growth by " + std::to_string(worst));

    if (rep.kind == ProblemCase::Singular) {
        out.a_values = {a_base, a_base * config.a_decay,
                        a_base * config.a_decay * config.a_decay,
                        a_base * config.a_decay * config.a_decay * config.a_decay};
        double worst_a = -std::numeric_limits<double>::infinity();
        for (Branch branch : {Branch::Plus, Branch::Minus}) {
            Curves prev;
            for (std::size_t k = 0; k < out.a_values.size(); ++k) {
                Curves cur =
                    integrate_finite_horizon(spec, n0, out.a_values[k], branch, config.step);
                if (k > 0) worst_a = std::max(worst_a, (cur.P - prev.P).maxCoeff());
                prev = std::move(cur);
            }
        }
        out.reg_margin = worst_a;
        if (worst_a > kMargin)
            fail(Errc::MonotonicityViolated,
                 "regularization ladder violates monotone decrease by " +
                     std::to_string(worst_a));
    }
    return out;
}

PositivityReport check_positivity(const ProblemSpec& spec, const RiccatiSolution& sol) {
    double min_q = std::numeric_limits<double>::infinity();
    for (const auto& regime : spec.coeffs.cells)
        for (const auto& c : regime) min_q = std::min(min_q, c.Q);
    if (!(min_q > 0.0))
        fail(Errc::PreconditionViolated,
             "positivity check requires a uniformly positive state weight");

    PositivityReport out;
    out.min_value = std::min(sol.P1.minCoeff(), sol.P2.minCoeff());
    if (!(out.min_value > 0.0))
        fail(Errc::PositivityViolated,
             "solution is not strictly positive on the retained window");

    if (sol.kind == ProblemCase::Singular) {
        const double delta = sol.report.delta;
        double c4 = 0.0;
        for (int i = 0; i < spec.gen.ell; ++i) {
            for (const auto& c : spec.coeffs.cells[static_cast<std::size_t>(i)]) {
                const VectorXd mix = c.B + c.D.transpose() * c.C;
                c4 = std::max(c4, -(2.0 * c.A + c.C.squaredNorm() + spec.gen.rates(i, i) -
                                    mix.squaredNorm() / delta));
            }
        }
        out.c4 = c4;
        const double n_final = sol.diag.horizon_final;
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < sol.grid.size(); ++k) {
            const double envelope =
                delta / c4 * (1.0 - std::exp(-c4 * (n_final - sol.grid[k])));
            for (int i = 0; i < spec.gen.ell; ++i) {
                worst = std::max(worst, envelope - sol.P1(static_cast<Eigen::Index>(k), i));
                worst = std::max(worst, envelope - sol.P2(static_cast<Eigen::Index>(k), i));
            }
        }
        out.envelope_margin = worst;
        if (worst > 1e-8)
            fail(Errc::PositivityViolated,
                 "singular lower envelope violated by " + std::to_string(worst));
    }
    return out;
}

void write_solution_csv(const RiccatiSolution& sol, std::ostream& os) {
    os << "t,regime,P1,P2\n";
    char buf[96];
    for (std::size_t k = 0; k < sol.grid.size(); ++k) {
        for (int i = 0; i < sol.P1.cols(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g,%d,%.17g,%.17g\n", sol.grid[k], i + 1,
                          sol.P1(static_cast<Eigen::Index>(k), i),
                          sol.P2(static_cast<Eigen::Index>(k), i));
            os << buf;
        }
    }
}

}  // namespace conelq
