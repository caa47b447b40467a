#pragma once

#include "conelq/riccati.hpp"
#include "conelq/simulate.hpp"

namespace conelq {

/// Market data on one time segment for one regime.
struct MarketCell {
    double r = 0.0;    // interest rate, 1/time
    VectorXd mu;       // appreciation rates, m
    MatrixXd sigma;    // volatility, m x n
    double rho = 0.0;  // discount rate, 1/time
};

struct MarketSpec {
    int m = 1;  // risky assets
    int n = 1;  // Brownian dimensions (m <= n)
    RegimeGenerator gen;
    std::vector<double> breakpoints;
    std::vector<std::vector<MarketCell>> cells;  // [regime][segment]
    double lambda = 0.0;  // control penalty weight, >= 0
    double d = 0.0;       // wealth target
    ConstraintCone cone;
    double x0 = 0.0;
    int i0 = 0;
};

void validate_market(const MarketSpec& market);

/// Change of variables into the tracking LQ instance:
/// A = r - rho, B = mu - r 1, C = 0, D = sigma', Q = 1, R = lambda I,
/// x0 -> x0 - d. Throws IllPosed when inf(rho - r) <= 0.
ProblemSpec to_lq(const MarketSpec& market);

/// Single-regime constant-coefficient closed form for lambda = 0 and the
/// nonnegative orthant: P2 = 1 / (2(rho - r) + (b+)^2 / sigma^2).
double closed_form_single(const MarketSpec& market);

/// Two-regime unconstrained closed form (r = 0, lambda = 0): the positive
/// solution of the 2x2 linear system M P = 1.
Eigen::Vector2d closed_form_two_regime(const MarketSpec& market);

struct TrackingSolution {
    RiccatiSolution lq;
    VectorXd P2_0;  // per-regime value coefficients at t = 0
    FeedbackPolicy policy;
    bool x0_above_target = false;  // flagged: mapping valid, economics degenerate
};

TrackingSolution track(const MarketSpec& market, const SolverConfig& config = {});

/// Optimal portfolio in original wealth variables. The caller supplies the
/// accumulated factors exp(int r) and exp(-int rho) along the realized
/// regime path.
VectorXd optimal_portfolio(const TrackingSolution& track, const MarketSpec& market,
                           double t, double wealth, int regime, double growth_factor,
                           double discount_factor);

/// Tracking value P2(0, i0) (x0 - d)^2 for x0 <= d.
double tracking_value(const TrackingSolution& track, const MarketSpec& market);

}  // namespace conelq
