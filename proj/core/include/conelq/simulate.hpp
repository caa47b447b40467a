#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "conelq/riccati.hpp"

namespace conelq {

/// Feedback gains cached on the solution grid. The control is
/// u(t, x, i) = pos_gain(t, i) x+ + neg_gain(t, i) x-, with
/// piecewise-constant lookup in t (held beyond the last grid point).
struct FeedbackPolicy {
    std::vector<double> grid;
    std::vector<MatrixXd> pos_gain;  // per regime: grid.size() x m
    std::vector<MatrixXd> neg_gain;

    int lookup(double t) const;
    VectorXd control(double t, double x, int regime) const;
};

FeedbackPolicy build_policy(const ProblemSpec& spec, const RiccatiSolution& sol);

/// The uncontrolled baseline u == 0; used by diagnostics and closed-form
/// cross-checks.
FeedbackPolicy zero_policy(const ProblemSpec& spec);

enum class PerturbMode { Scale, Swap };

/// Suboptimality probes: Scale multiplies both gain families by (1+epsilon),
/// Swap exchanges them. Either stays inside the cone.
FeedbackPolicy perturb_policy(const FeedbackPolicy& policy, double epsilon,
                              PerturbMode mode);

struct SimConfig {
    double dt = 1e-3;
    double T = 0.0;  // <= 0 means 4 * (10 / rho)
    long paths = 10'000;
    std::uint64_t seed = 0;
    bool antithetic = false;
    int threads = 0;  // 0 means hardware concurrency; result is thread-count invariant
};

/// Jump times and visited states of one exact chain path on [0, T].
struct RegimeEvents {
    std::vector<double> times;   // times.front() == 0
    std::vector<int> states;     // states[k] holds on [times[k], times[k+1])
};

RegimeEvents sample_regime_events(const RegimeGenerator& gen, int i0, double T,
                                  std::mt19937_64& rng);

/// Exact chain path discretized to the dt grid by right-continuous lookup;
/// returns steps+1 regime indices.
std::vector<int> sample_regime_path(const RegimeGenerator& gen, int i0, double T,
                                    double dt, std::mt19937_64& rng);

struct CostEstimate {
    double mean = 0.0;        // truncated-horizon cost estimate
    double std_error = 0.0;
    double tail_bound = 0.0;  // bound on the discarded tail beyond T
    double decay_rate = 0.0;  // fitted exponential rate of E[X(t)^2], 1/time
    long paths = 0;
    double dt = 0.0;
    double T = 0.0;
    std::uint64_t seed = 0;
};

struct DecayReport {
    std::vector<double> times;          // checkpoint times
    std::vector<double> second_moment;  // estimated E[X(t)^2]
    double fitted_rate = 0.0;
    double terminal = 0.0;      // estimate at T
    double quarter = 0.0;       // estimate near T/4
};

struct SimResult {
    CostEstimate cost;
    DecayReport decay;
    std::vector<double> path_costs;  // per-path truncated costs, path order
};

/// Path engine shared by the cost estimator and the decay diagnostic.
/// Per-path generators derive from hash(seed, path index), and reductions
/// run in fixed path order, so results are bitwise reproducible for any
/// thread count.
SimResult simulate_paths(const ProblemSpec& spec, const FeedbackPolicy& policy,
                         const SimConfig& config);

CostEstimate simulate_cost(const ProblemSpec& spec, const FeedbackPolicy& policy,
                           const SimConfig& config);

/// Returns the second-moment curve and asserts decay in the large:
/// E[X(T)^2] < E[X(T/4)^2] (trivially passed by an identically zero state).
DecayReport stability_diagnostic(const ProblemSpec& spec, const FeedbackPolicy& policy,
                                 const SimConfig& config);

}  // namespace conelq
