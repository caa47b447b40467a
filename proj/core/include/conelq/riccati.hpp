#pragma once

#include <iosfwd>
#include <vector>

#include "conelq/cone.hpp"
#include "conelq/model.hpp"

namespace conelq {

struct SolverConfig {
    double step = 1e-2;          // backward integration step, time
    double horizon0 = 0.0;       // initial horizon; <= 0 means 10 / rho
    double horizon_growth = 2.0;
    double horizon_tol = 1e-8;   // |P at t=0| convergence between horizons
    double a0 = 0.0;             // initial regularization; <= 0 means 1e-2 (1 + c1/rho)
    double a_decay = 0.5;
    double a_tol = 1e-7;         // |P at t=0| convergence of the a-loop
    int max_rounds = 48;         // cap on both loops
};

struct SolveDiagnostics {
    int horizon_rounds = 0;
    double horizon_final = 0.0;
    double horizon_increment = 0.0;  // last t=0 change between horizons
    int reg_rounds = 0;
    double reg_increment = 0.0;      // last t=0 change of the a-loop
    double min_value = 0.0;
    double max_value = 0.0;
    double side_condition_min = 0.0;  // min eig of R + P D'D + a I on the grid
};

/// The two Riccati curves on the retained window [0, horizon0], one column
/// per regime, plus the assumptions and solve metadata needed to audit them.
struct RiccatiSolution {
    std::vector<double> grid;
    MatrixXd P1;  // grid.size() x ell
    MatrixXd P2;
    ProblemCase kind = ProblemCase::Unsupported;
    double a_final = 0.0;
    AssumptionReport report;
    SolveDiagnostics diag;
};

/// Canonical integration grid on [0, horizon]: every coefficient breakpoint
/// is a grid point, segments subdivide uniformly at spacing <= step, and the
/// tail beyond the last breakpoint uses exact multiples of step. Grids for
/// nested horizons coincide point-for-point, which the monotonicity ladders
/// rely on.
std::vector<double> integration_grid(const ProblemSpec& spec, double step, double horizon);

/// Smallest canonical grid point >= horizon.
double snap_horizon(const ProblemSpec& spec, double step, double horizon);

struct Curves {
    std::vector<double> grid;
    MatrixXd P;  // grid.size() x ell
};

/// Backward classical Runge-Kutta solve of the coupled Riccati system from
/// the zero terminal condition at `horizon`, with regularization a added to
/// the Hamiltonian weight.
Curves integrate_finite_horizon(const ProblemSpec& spec, double horizon, double a,
                                Branch branch, double step);

/// Infinite-horizon solve by horizon extension (standard case) with an outer
/// regularization loop driving a to 0 (singular case).
RiccatiSolution solve_infinite(const ProblemSpec& spec, const SolverConfig& config = {});

struct AlgebraicRoots {
    VectorXd P1;
    VectorXd P2;
    double residual = 0.0;
    int iterations = 0;
};

/// Newton iteration on the stationary (constant-coefficient) system, seeded
/// from the monotone-limit solution so it lands on the nonnegative root.
AlgebraicRoots solve_algebraic(const ProblemSpec& spec, const RiccatiSolution& seed);

/// P1(0,i0) (x+)^2 + P2(0,i0) (x-)^2.
double value_function(const RiccatiSolution& sol, double x, int regime);

struct MonotonicityReport {
    std::vector<double> horizons;
    double horizon_margin = 0.0;  // worst P^N - P^M with N <= M (should be <= 0)
    std::vector<double> a_values;
    double reg_margin = 0.0;      // worst P^{a'} - P^{a} with a' < a
};

/// Re-runs finite-horizon ladders and checks the monotone structure:
/// nondecreasing in the horizon, nonincreasing as the regularization
/// shrinks. Throws MonotonicityViolated beyond a 1e-8 margin.
MonotonicityReport check_monotonicity(const ProblemSpec& spec,
                                      const SolverConfig& config = {});

struct PositivityReport {
    double min_value = 0.0;
    double envelope_margin = 0.0;  // worst envelope - P in the singular case
    double c4 = 0.0;
};

/// Requires a uniformly positive state weight. Checks strict positivity of
/// the returned curves and, in the singular case, the exponential lower
/// envelope with its constant computed from the coefficient grid.
PositivityReport check_positivity(const ProblemSpec& spec, const RiccatiSolution& sol);

/// CSV columns (t, regime, P1, P2), one row per grid point per regime;
/// regime labels are 1-based.
void write_solution_csv(const RiccatiSolution& sol, std::ostream& os);

}  // namespace conelq
