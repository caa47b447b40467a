#include "conelq/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace conelq {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t path_seed(std::uint64_t seed, long unit) {
    return splitmix64(seed ^ splitmix64(0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(unit) + 1)));
}

}  // namespace

int FeedbackPolicy::lookup(double t) const {
    auto it = std::upper_bound(grid.begin(), grid.end(), t);
    const auto idx = static_cast<long>(it - grid.begin()) - 1;
    return static_cast<int>(std::clamp<long>(idx, 0, static_cast<long>(grid.size()) - 1));
}

VectorXd FeedbackPolicy::control(double t, double x, int regime) const {
    const int k = lookup(t);
    const auto& pos = pos_gain[static_cast<std::size_t>(regime)];
    const auto& neg = neg_gain[static_cast<std::size_t>(regime)];
    return pos.row(k).transpose() * std::max(x, 0.0) +
           neg.row(k).transpose() * std::max(-x, 0.0);
}

FeedbackPolicy build_policy(const ProblemSpec& spec, const RiccatiSolution& sol) {
    FeedbackPolicy policy;
    policy.grid = sol.grid;
    const int ell = spec.gen.ell;
    const int m = spec.coeffs.m;
    const auto npts = static_cast<Eigen::Index>(sol.grid.size());

    policy.pos_gain.assign(static_cast<std::size_t>(ell), MatrixXd::Zero(npts, m));
    policy.neg_gain.assign(static_cast<std::size_t>(ell), MatrixXd::Zero(npts, m));

    for (int i = 0; i < ell; ++i) {
        for (Eigen::Index k = 0; k < npts; ++k) {
            const double t = sol.grid[static_cast<std::size_t>(k)];
            const CoefficientCell& cell = coefficients_at(spec, t, i);
            policy.pos_gain[static_cast<std::size_t>(i)].row(k) =
                eval_hamiltonian(Branch::Plus, sol.P1(k, i), cell, spec.cone, sol.a_final)
                    .minimizer.transpose();
            policy.neg_gain[static_cast<std::size_t>(i)].row(k) =
                eval_hamiltonian(Branch::Minus, sol.P2(k, i), cell, spec.cone, sol.a_final)
                    .minimizer.transpose();
        }
    }
    return policy;
}

FeedbackPolicy zero_policy(const ProblemSpec& spec) {
    FeedbackPolicy policy;
    policy.grid = {0.0};
    policy.pos_gain.assign(static_cast<std::size_t>(spec.gen.ell),
                           MatrixXd::Zero(1, spec.coeffs.m));
    policy.neg_gain = policy.pos_gain;
    return policy;
}

FeedbackPolicy perturb_policy(const FeedbackPolicy& policy, double epsilon,
                              PerturbMode mode) {
    if (epsilon < 0.0) fail(Errc::PreconditionViolated, "epsilon must be nonnegative");
    FeedbackPolicy out = policy;
    switch (mode) {
        case PerturbMode::Scale:
            for (auto& g : out.pos_gain) g *= (1.0 + epsilon);
            for (auto& g : out.neg_gain) g *= (1.0 + epsilon);
            break;
        case PerturbMode::Swap:
            std::swap(out.pos_gain, out.neg_gain);
            break;
    }
    return out;
}

RegimeEvents sample_regime_events(const RegimeGenerator& gen, int i0, double T,
                                  std::mt19937_64& rng) {
    if (i0 < 0 || i0 >= gen.ell) fail(Errc::PreconditionViolated, "regime index out of range");
    RegimeEvents ev;
    ev.times.push_back(0.0);
    ev.states.push_back(i0);

    double t = 0.0;
    int state = i0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    while (t < T) {
        const double rate = -gen.rates(state, state);
        if (rate <= 0.0) break;  // absorbing
        std::exponential_distribution<double> hold(rate);
        t += hold(rng);
        if (t >= T) break;

        // jump to j != state with probability q(state, j) / rate
        const double u = unif(rng) * rate;
        double acc = 0.0;
        int next = state;
        for (int j = 0; j < gen.ell; ++j) {
            if (j == state) continue;
            acc += gen.rates(state, j);
            if (u < acc) {
                next = j;
                break;
            }
        }
        if (next == state) continue;  // guard roundoff at acc boundary
        state = next;
        ev.times.push_back(t);
        ev.states.push_back(state);
    }
    return ev;
}

std::vector<int> sample_regime_path(const RegimeGenerator& gen, int i0, double T,
                                    double dt, std::mt19937_64& rng) {
    const RegimeEvents ev = sample_regime_events(gen, i0, T, rng);
    const auto steps = static_cast<long>(std::llround(T / dt));
    std::vector<int> path(static_cast<std::size_t>(steps) + 1);
    std::size_t e = 0;
    for (long k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        while (e + 1 < ev.times.size() && ev.times[e + 1] <= t) ++e;
        path[static_cast<std::size_t>(k)] = ev.states[e];
    }
    return path;
}

namespace {

struct EngineSetup {
    long steps = 0;
    double T = 0.0;
    std::vector<int> seg;        // coefficient segment per step
    std::vector<int> gain_idx;   // policy grid row per step
    std::vector<long> chk_steps; // checkpoint step indices, ascending, last == steps
    double explode_bound = 0.0;
    double c1 = 0.0;
    double c_u = 0.0;            // bound on the control cost density over X^2
};

EngineSetup prepare(const ProblemSpec& spec, const FeedbackPolicy& policy,
                    const SimConfig& cfg, const AssumptionReport& rep) {
    EngineSetup s;
    if (!(cfg.dt > 0.0)) fail(Errc::BadInput, "dt must be positive");
    s.T = cfg.T > 0.0 ? cfg.T : 40.0 / rep.rho;
    const double ratio = s.T / cfg.dt;
    s.steps = static_cast<long>(std::llround(ratio));
    if (s.steps < 1 || std::abs(ratio - static_cast<double>(s.steps)) > 1e-9 * ratio)
        fail(Errc::BadInput, "T must be a positive multiple of dt");
    if (cfg.paths < 2) fail(Errc::BadInput, "need at least two paths");
    if (cfg.antithetic && cfg.paths % 2 != 0)
        fail(Errc::BadInput, "antithetic pairing needs an even path count");

    s.seg.resize(static_cast<std::size_t>(s.steps));
    s.gain_idx.resize(static_cast<std::size_t>(s.steps));
    for (long k = 0; k < s.steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        s.seg[static_cast<std::size_t>(k)] = segment_index(spec.coeffs, t);
        s.gain_idx[static_cast<std::size_t>(k)] = policy.lookup(t);
    }

    const long n_chk = std::min<long>(s.steps, 200);
    for (long c = 0; c <= n_chk; ++c) {
        const long idx = (s.steps * c) / n_chk;
        if (s.chk_steps.empty() || s.chk_steps.back() != idx) s.chk_steps.push_back(idx);
    }

    s.explode_bound = 1e6 * (1.0 + std::abs(spec.x0));
    s.c1 = rep.c1;

    double cu = 0.0;
    for (int i = 0; i < spec.gen.ell; ++i) {
        // largest eigenvalue of R per segment, hoisted out of the grid loop
        std::vector<double> lam_r;
        for (const auto& cell : spec.coeffs.cells[static_cast<std::size_t>(i)]) {
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(cell.R);
            lam_r.push_back(std::max(es.eigenvalues().maxCoeff(), 0.0));
        }
        const auto& pos = policy.pos_gain[static_cast<std::size_t>(i)];
        const auto& neg = policy.neg_gain[static_cast<std::size_t>(i)];
        for (Eigen::Index k = 0; k < pos.rows(); ++k) {
            const double t = policy.grid[static_cast<std::size_t>(k)];
            const double lam = lam_r[static_cast<std::size_t>(segment_index(spec.coeffs, t))];
            const double gn = std::max(pos.row(k).squaredNorm(), neg.row(k).squaredNorm());
            cu = std::max(cu, lam * gn);
        }
    }
    s.c_u = cu;
    return s;
}

struct PathAccumulator {
    std::vector<double> costs;       // per path
    std::vector<double> sq;          // paths x checkpoints, path-major
};

void run_unit(const ProblemSpec& spec, const FeedbackPolicy& policy, const SimConfig& cfg,
              const EngineSetup& s, long unit, PathAccumulator& acc) {
    const int n = spec.coeffs.n;
    const int m = spec.coeffs.m;
    const double dt = cfg.dt;
    const double sqrt_dt = std::sqrt(dt);
    const int members = cfg.antithetic ? 2 : 1;

    std::mt19937_64 rng(path_seed(cfg.seed, unit));
    const std::vector<int> regimes = sample_regime_path(spec.gen, spec.i0, s.T, dt, rng);
    std::normal_distribution<double> normal(0.0, 1.0);

    VectorXd u = VectorXd::Zero(m), ru = VectorXd::Zero(m);
    VectorXd diff = VectorXd::Zero(n), dw = VectorXd::Zero(n);

    std::vector<double> x(static_cast<std::size_t>(members), spec.x0);
    std::vector<double> cost(static_cast<std::size_t>(members), 0.0);

    const std::size_t n_chk = s.chk_steps.size();
    std::size_t next_chk = 0;

    auto record_checkpoint = [&](long k) {
        while (next_chk < n_chk && s.chk_steps[next_chk] == k) {
            for (int a = 0; a < members; ++a) {
                const long p = unit * members + a;
                acc.sq[static_cast<std::size_t>(p) * n_chk + next_chk] =
                    x[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
            }
            ++next_chk;
        }
    };

    for (long k = 0; k < s.steps; ++k) {
        record_checkpoint(k);
        const double t = static_cast<double>(k) * dt;
        const int i = regimes[static_cast<std::size_t>(k)];
        const CoefficientCell& cell =
            spec.coeffs.cells[static_cast<std::size_t>(i)]
                             [static_cast<std::size_t>(s.seg[static_cast<std::size_t>(k)])];
        const int g = s.gain_idx[static_cast<std::size_t>(k)];
        const auto& pos = policy.pos_gain[static_cast<std::size_t>(i)];
        const auto& neg = policy.neg_gain[static_cast<std::size_t>(i)];

        for (int c = 0; c < n; ++c) dw(c) = normal(rng) * sqrt_dt;

        for (int a = 0; a < members; ++a) {
            const double xa = x[static_cast<std::size_t>(a)];
            u.noalias() = pos.row(g).transpose() * std::max(xa, 0.0);
            u.noalias() += neg.row(g).transpose() * std::max(-xa, 0.0);
            ru.noalias() = cell.R * u;
            cost[static_cast<std::size_t>(a)] += (cell.Q * xa * xa + u.dot(ru)) * dt;

            diff.noalias() = cell.C * xa;
            diff.noalias() += cell.D * u;
            const double sign = (a == 0) ? 1.0 : -1.0;  // antithetic member negates dW
            const double x_next = xa + (cell.A * xa + cell.B.dot(u)) * dt +
                                  sign * diff.dot(dw);
            if (!std::isfinite(x_next) || std::abs(x_next) > s.explode_bound)
                fail(Errc::ExplodedPath,
                     "state reached " + std::to_string(x_next) + " at t = " +
                         std::to_string(t) + "; reduce dt or revisit the instance");
            x[static_cast<std::size_t>(a)] = x_next;
        }
    }
    record_checkpoint(s.steps);

    for (int a = 0; a < members; ++a)
        acc.costs[static_cast<std::size_t>(unit * members + a)] = cost[static_cast<std::size_t>(a)];
}

double fit_decay_rate(const std::vector<double>& times, const std::vector<double>& moments,
                      double T) {
    // least squares on log E[X(t)^2] over the trailing half of [0, T]
    std::vector<double> ts, ys;
    for (std::size_t c = 0; c < times.size(); ++c) {
        if (times[c] >= 0.5 * T - 1e-12) {
            if (moments[c] <= 0.0) return 0.0;
            ts.push_back(times[c]);
            ys.push_back(std::log(moments[c]));
        }
    }
    if (ts.size() < 2) return 0.0;
    double mt = 0.0, my = 0.0;
    for (std::size_t c = 0; c < ts.size(); ++c) {
        mt += ts[c];
        my += ys[c];
    }
    mt /= static_cast<double>(ts.size());
    my /= static_cast<double>(ts.size());
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < ts.size(); ++c) {
        num += (ts[c] - mt) * (ys[c] - my);
        den += (ts[c] - mt) * (ts[c] - mt);
    }
    return den > 0.0 ? -num / den : 0.0;
}

}  // namespace

SimResult simulate_paths(const ProblemSpec& spec, const FeedbackPolicy& policy,
                         const SimConfig& config) {
    const AssumptionReport rep = check_assumptions(spec);
    const EngineSetup s = prepare(spec, policy, config, rep);

    const int members = config.antithetic ? 2 : 1;
    const long units = config.paths / members;
    const std::size_t n_chk = s.chk_steps.size();

    PathAccumulator acc;
    acc.costs.assign(static_cast<std::size_t>(config.paths), 0.0);
    acc.sq.assign(static_cast<std::size_t>(config.paths) * n_chk, 0.0);

    int workers = config.threads > 0
                      ? config.threads
                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = static_cast<int>(std::min<long>(workers, units));

    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    auto body = [&](int w) {
        try {
            for (long unit = w; unit < units; unit += workers)
                run_unit(spec, policy, config, s, unit, acc);
        } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
    };

    if (workers <= 1) {
        body(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(body, w);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    SimResult result;
    result.path_costs = acc.costs;

    // fixed-order reductions keep results independent of the worker count
    double mean = 0.0;
    for (long p = 0; p < config.paths; ++p) mean += acc.costs[static_cast<std::size_t>(p)];
    mean /= static_cast<double>(config.paths);

    double var = 0.0;
    long indep_units = units;
    if (config.antithetic) {
        for (long uidx = 0; uidx < units; ++uidx) {
            const double pair_mean = 0.5 * (acc.costs[static_cast<std::size_t>(2 * uidx)] +
                                            acc.costs[static_cast<std::size_t>(2 * uidx + 1)]);
            var += (pair_mean - mean) * (pair_mean - mean);
        }
    } else {
        for (long p = 0; p < config.paths; ++p) {
            const double d = acc.costs[static_cast<std::size_t>(p)] - mean;
            var += d * d;
        }
    }
    const double denom = static_cast<double>(indep_units) *
                         static_cast<double>(std::max<long>(indep_units - 1, 1));
    const double std_error = std::sqrt(var / denom);

    DecayReport decay;
    decay.times.resize(n_chk);
    decay.second_moment.assign(n_chk, 0.0);
    for (std::size_t c = 0; c < n_chk; ++c) {
        decay.times[c] = static_cast<double>(s.chk_steps[c]) * config.dt;
        double acc_sq = 0.0;
        for (long p = 0; p < config.paths; ++p)
            acc_sq += acc.sq[static_cast<std::size_t>(p) * n_chk + c];
        decay.second_moment[c] = acc_sq / static_cast<double>(config.paths);
    }
    decay.fitted_rate = fit_decay_rate(decay.times, decay.second_moment, s.T);
    decay.terminal = decay.second_moment.back();
    {
        // checkpoint nearest T/4
        const double target = 0.25 * s.T;
        std::size_t best = 0;
        for (std::size_t c = 0; c < n_chk; ++c)
            if (std::abs(decay.times[c] - target) < std::abs(decay.times[best] - target))
                best = c;
        decay.quarter = decay.second_moment[best];
    }

    CostEstimate est;
    est.mean = mean;
    est.std_error = std_error;
    est.decay_rate = decay.fitted_rate;
    est.tail_bound = decay.terminal > 0.0
                         ? (s.c1 + s.c_u) * decay.terminal / std::max(decay.fitted_rate, 1e-12)
                         : 0.0;
    est.paths = config.paths;
    est.dt = config.dt;
    est.T = s.T;
    est.seed = config.seed;

    result.cost = est;
    result.decay = decay;
    return result;
}

CostEstimate simulate_cost(const ProblemSpec& spec, const FeedbackPolicy& policy,
                           const SimConfig& config) {
    return simulate_paths(spec, policy, config).cost;
}

DecayReport stability_diagnostic(const ProblemSpec& spec, const FeedbackPolicy& policy,
                                 const SimConfig& config) {
    const SimResult result = simulate_paths(spec, policy, config);
    const auto& d = result.decay;
    const double peak =
        *std::max_element(d.second_moment.begin(), d.second_moment.end());
    if (peak > 0.0 && !(d.terminal < d.quarter))
        fail(Errc::NoDecay, "E[X(T)^2] = " + std::to_string(d.terminal) +
                                " did not fall below E[X(T/4)^2] = " +
                                std::to_string(d.quarter));
    return d;
}

}  // namespace conelq
