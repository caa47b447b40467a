// Batch front door: ingest a problem or market spec, run the solve /
// simulate / verify / portfolio pipelines, and emit machine-readable
// reports. Exit codes: 0 success, 1 I/O, 2 validation, 3 property-check
// failure, 4 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "conelq/json_io.hpp"
#include "conelq/portfolio.hpp"
#include "conelq/riccati.hpp"
#include "conelq/simulate.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace conelq;

namespace {

int exit_bucket(Errc code) {
    switch (code) {
        case Errc::Io:
            return 1;
        case Errc::BadInput:
        case Errc::NegativeOffDiagonal:
        case Errc::RowSumNonzero:
        case Errc::StabilityViolated:
        case Errc::UnsupportedCase:
        case Errc::PreconditionViolated:
        case Errc::IllPosed:
            return 2;
        case Errc::MonotonicityViolated:
        case Errc::PositivityViolated:
        case Errc::NoDecay:
            return 3;
        default:
            return 4;
    }
}

struct Options {
    std::string input;
    std::string out_dir;
    std::uint64_t seed = 12345;
    std::vector<std::string> overrides;
    long paths = -1;
    double dt = -1.0;
    double horizon = -1.0;
    bool dump_paths = false;
};

struct RunConfig {
    SolverConfig solver;
    SimConfig sim;
    int ham_samples = 200;
    int projection_samples = 200;
};

void apply_override(RunConfig& cfg, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
        fail(Errc::BadInput, "override '" + kv + "' is not of the form key=value");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    double num = 0.0;
    try {
        num = std::stod(value);
    } catch (const std::exception&) {
        fail(Errc::BadInput, "override '" + key + "' needs a numeric value");
    }

    if (key == "solver.step") cfg.solver.step = num;
    else if (key == "solver.horizon0") cfg.solver.horizon0 = num;
    else if (key == "solver.growth") cfg.solver.horizon_growth = num;
    else if (key == "solver.horizon_tol") cfg.solver.horizon_tol = num;
    else if (key == "solver.a0") cfg.solver.a0 = num;
    else if (key == "solver.a_decay") cfg.solver.a_decay = num;
    else if (key == "solver.a_tol") cfg.solver.a_tol = num;
    else if (key == "solver.max_rounds") cfg.solver.max_rounds = static_cast<int>(num);
    else if (key == "sim.dt") cfg.sim.dt = num;
    else if (key == "sim.T") cfg.sim.T = num;
    else if (key == "sim.paths") cfg.sim.paths = static_cast<long>(num);
    else if (key == "sim.antithetic") cfg.sim.antithetic = num != 0.0;
    else if (key == "sim.threads") cfg.sim.threads = static_cast<int>(num);
    else if (key == "verify.ham_samples") cfg.ham_samples = static_cast<int>(num);
    else if (key == "verify.projection_samples") cfg.projection_samples = static_cast<int>(num);
    else fail(Errc::BadInput, "unknown config key '" + key + "'");
}

RunConfig build_config(const Options& opt) {
    RunConfig cfg;
    cfg.sim.paths = 1000;  // verify/simulate default at CLI scale
    for (const auto& kv : opt.overrides) apply_override(cfg, kv);
    if (opt.paths > 0) cfg.sim.paths = opt.paths;
    if (opt.dt > 0.0) cfg.sim.dt = opt.dt;
    if (opt.horizon > 0.0) cfg.solver.horizon0 = opt.horizon;
    cfg.sim.seed = opt.seed;
    return cfg;
}

fs::path resolve_out_dir(const Options& opt) {
    std::string dir = opt.out_dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("CONELQ_OUT_DIR")) dir = env;
    }
    if (dir.empty()) dir = ".";
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) fail(Errc::Io, "cannot create output directory " + p.string());
    return p;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::Io, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out.good()) fail(Errc::Io, "failed writing " + path.string());
}

// ---------------------------------------------------------------- solve --

int run_solve(const Options& opt) {
    const RunConfig cfg = build_config(opt);
    const ProblemSpec spec = load_problem(opt.input);
    const RiccatiSolution sol = solve_infinite(spec, cfg.solver);

    const fs::path out = resolve_out_dir(opt);
    std::ostringstream csv;
    write_solution_csv(sol, csv);
    write_text(out / "solution.csv", csv.str());
    write_text(out / "metadata.json", solution_metadata_json(sol, cfg.solver));

    std::cout << "case " << case_name(sol.kind) << ", P1(0," << spec.i0 + 1
              << ") = " << sol.P1(0, spec.i0) << ", P2(0," << spec.i0 + 1
              << ") = " << sol.P2(0, spec.i0) << "\n";
    return 0;
}

// ------------------------------------------------------------- simulate --

int run_simulate(const Options& opt) {
    const RunConfig cfg = build_config(opt);
    const ProblemSpec spec = load_problem(opt.input);
    const RiccatiSolution sol = solve_infinite(spec, cfg.solver);
    const FeedbackPolicy policy = build_policy(spec, sol);
    const SimResult result = simulate_paths(spec, policy, cfg.sim);

    const fs::path out = resolve_out_dir(opt);
    write_text(out / "simulate.json", cost_estimate_json(result.cost));
    if (opt.dump_paths) {
        std::ostringstream csv;
        csv << "path,cost\n";
        char buf[64];
        for (std::size_t p = 0; p < result.path_costs.size(); ++p) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", p, result.path_costs[p]);
            csv << buf;
        }
        write_text(out / "paths.csv", csv.str());
    }

    std::cout << "cost " << result.cost.mean << " +/- " << result.cost.std_error
              << " (tail bound " << result.cost.tail_bound << ", value "
              << value_function(sol, spec.x0, spec.i0) << ")\n";
    return 0;
}

// --------------------------------------------------------------- verify --

struct CheckRow {
    std::string name;
    std::string status;  // pass / fail / skip
    double margin = 0.0;
    std::string detail;
};

class VerifySuite {
public:
    VerifySuite(const ProblemSpec& spec, const RunConfig& cfg, std::uint64_t seed)
        : spec_(spec), cfg_(cfg), rng_(seed) {}

    std::vector<CheckRow> run() {
        rows_.clear();
        report_ = check_assumptions(spec_);
        add("assumptions", "pass", report_.rho,
            std::string(case_name(report_.kind)) + ", rho = " + std::to_string(report_.rho));

        check_projection_properties();
        check_hamiltonian_oracle();
        solve();
        check_monotone();
        check_positive();
        check_symmetric_collapse();
        check_mc();
        return rows_;
    }

private:
    void add(const std::string& name, const std::string& status, double margin,
             const std::string& detail) {
        rows_.push_back({name, status, margin, detail});
    }

    const CoefficientCell& random_cell(int* regime_out = nullptr) {
        std::uniform_int_distribution<int> ri(0, spec_.gen.ell - 1);
        std::uniform_int_distribution<int> rs(
            0, static_cast<int>(spec_.coeffs.breakpoints.size()) - 1);
        const int i = ri(rng_);
        if (regime_out) *regime_out = i;
        return spec_.coeffs.cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(rs(rng_))];
    }

    void check_projection_properties() {
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 2.0);
        double worst = 0.0;
        for (int k = 0; k < cfg_.projection_samples; ++k) {
            VectorXd p(spec_.coeffs.m);
            for (int c = 0; c < spec_.coeffs.m; ++c) p(c) = normal(rng_);
            VectorXd q(spec_.coeffs.m);
            for (int c = 0; c < spec_.coeffs.m; ++c) q(c) = normal(rng_);
            const VectorXd pp = project_cone(spec_.cone, p);
            const VectorXd qq = project_cone(spec_.cone, q);
            worst = std::max(worst, (project_cone(spec_.cone, pp) - pp).norm());
            const double lam = unif(rng_);
            worst = std::max(worst, (project_cone(spec_.cone, lam * p) - lam * pp).norm());
            worst = std::max(worst, (pp - qq).norm() - (p - q).norm());
            worst = std::max(worst, std::abs((p - pp).dot(pp)) /
                                        std::max(1.0, p.squaredNorm()));
        }
        add("projection_properties", worst <= 1e-9 ? "pass" : "fail", worst,
            "idempotence, homogeneity, nonexpansiveness, orthogonality");
    }

    void check_hamiltonian_oracle() {
        const bool oracle_ok =
            spec_.coeffs.m <= 4 &&
            (spec_.cone.kind != ConstraintCone::Kind::Generated ||
             spec_.cone.generators.cols() <= 6);
        if (!oracle_ok) {
            add("hamiltonian_oracle", "skip", 0.0, "face enumeration limits exceeded");
            return;
        }
        std::uniform_real_distribution<double> up(0.0, std::max(report_.p_upper, 1.0));
        const double a_probe =
            report_.kind == ProblemCase::Singular ? 1e-2 * (1.0 + report_.p_upper) : 0.0;
        double worst = 0.0;
        for (int k = 0; k < cfg_.ham_samples; ++k) {
            const CoefficientCell& cell = random_cell();
            const double p = up(rng_);
            for (Branch branch : {Branch::Plus, Branch::Minus}) {
                const double a = (k % 2 == 0) ? a_probe : std::max(a_probe, 1e-3);
                const HamiltonianEval ev = eval_hamiltonian(branch, p, cell, spec_.cone, a);
                const double oracle = brute_force_hamiltonian(branch, p, cell, spec_.cone, a);
                worst = std::max(worst, std::abs(ev.value - oracle));
            }
        }
        add("hamiltonian_oracle", worst <= 1e-8 ? "pass" : "fail", worst,
            std::to_string(cfg_.ham_samples) + " random weights per branch");
    }

    void solve() {
        sol_ = solve_infinite(spec_, cfg_.solver);
        const double upper_excess = sol_.diag.max_value - (report_.p_upper + 1e-6);
        add("upper_bound", upper_excess <= 0.0 ? "pass" : "fail", upper_excess,
            "max P vs c1/rho + 1e-6");
        add("side_condition", sol_.diag.side_condition_min > 0.0 ? "pass" : "fail",
            sol_.diag.side_condition_min, "min eig of R + P D'D + aI on the grid");
    }

    void check_monotone() {
        try {
            const MonotonicityReport rep = check_monotonicity(spec_, cfg_.solver);
            add("monotonicity", "pass", std::max(rep.horizon_margin, rep.reg_margin),
                "horizon and regularization ladders");
        } catch (const Error& e) {
            if (e.code() != Errc::MonotonicityViolated) throw;
            add("monotonicity", "fail", 0.0, e.what());
        }
    }

    void check_positive() {
        try {
            const PositivityReport rep = check_positivity(spec_, sol_);
            add("positivity", "pass", rep.min_value, "strict positivity and lower envelope");
        } catch (const Error& e) {
            if (e.code() == Errc::PreconditionViolated) {
                add("positivity", "skip", 0.0, "state weight is not uniformly positive");
            } else if (e.code() == Errc::PositivityViolated) {
                add("positivity", "fail", 0.0, e.what());
            } else {
                throw;
            }
        }
    }

    void check_symmetric_collapse() {
        if (!cone_is_symmetric(spec_.cone)) {
            add("symmetric_collapse", "skip", 0.0, "cone is not symmetric");
            return;
        }
        const double gap = (sol_.P1 - sol_.P2).cwiseAbs().maxCoeff();
        add("symmetric_collapse", gap <= 1e-8 ? "pass" : "fail", gap, "max |P1 - P2|");
    }

    void check_mc() {
        const FeedbackPolicy policy = build_policy(spec_, sol_);
        const SimResult base = simulate_paths(spec_, policy, cfg_.sim);
        const double value = value_function(sol_, spec_.x0, spec_.i0);

        const double err = std::abs(base.cost.mean + 0.5 * base.cost.tail_bound - value);
        const double tol = std::max(3.0 * base.cost.std_error, base.cost.tail_bound);
        add("mc_value", err <= tol ? "pass" : "fail", err - tol,
            "cost " + std::to_string(base.cost.mean) + " vs value " + std::to_string(value));

        double worst = 0.0;
        const std::vector<std::pair<double, PerturbMode>> probes = {
            {0.5, PerturbMode::Scale},
            {0.25, PerturbMode::Scale},
            {0.1, PerturbMode::Scale},
            {1.0, PerturbMode::Scale},
            {0.0, PerturbMode::Swap}};
        for (const auto& [eps, mode] : probes) {
            const FeedbackPolicy probe = perturb_policy(policy, eps, mode);
            const CostEstimate c = simulate_cost(spec_, probe, cfg_.sim);
            worst = std::min(worst, c.mean - (base.cost.mean - 2.0 * base.cost.std_error));
        }
        add("mc_optimality", worst >= 0.0 ? "pass" : "fail", worst,
            "perturbed costs vs optimal - 2 stderr on common random numbers");

        if (spec_.x0 == 0.0) {
            add("stability", base.decay.terminal == 0.0 ? "pass" : "fail", 0.0,
                "zero initial state keeps the state at zero");
        } else {
            const bool decayed = base.decay.terminal < base.decay.quarter;
            add("stability", decayed ? "pass" : "fail",
                base.decay.quarter - base.decay.terminal,
                "E[X(T)^2] vs E[X(T/4)^2], fitted rate " +
                    std::to_string(base.decay.fitted_rate));
        }

        const CostEstimate rerun = simulate_cost(spec_, policy, cfg_.sim);
        const bool same = rerun.mean == base.cost.mean &&
                          rerun.std_error == base.cost.std_error &&
                          rerun.tail_bound == base.cost.tail_bound;
        add("determinism", same ? "pass" : "fail", 0.0,
            "re-simulation with the same seed is bitwise identical");
    }

    const ProblemSpec& spec_;
    const RunConfig& cfg_;
    std::mt19937_64 rng_;
    AssumptionReport report_;
    RiccatiSolution sol_;
    std::vector<CheckRow> rows_;
};

int run_verify(const Options& opt) {
    const RunConfig cfg = build_config(opt);
    const ProblemSpec spec = load_problem(opt.input);

    VerifySuite suite(spec, cfg, opt.seed);
    const std::vector<CheckRow> rows = suite.run();

    bool all_pass = true;
    ordered_json checks = ordered_json::array();
    for (const auto& row : rows) {
        checks.push_back({{"name", row.name},
                          {"status", row.status},
                          {"margin", row.margin},
                          {"detail", row.detail}});
        if (row.status == "fail") all_pass = false;
        std::cout << (row.status == "pass"   ? "[PASS] "
                      : row.status == "skip" ? "[SKIP] "
                                             : "[FAIL] ")
                  << row.name << ": " << row.detail << "\n";
    }

    ordered_json report;
    report["input"] = opt.input;
    report["seed"] = opt.seed;
    report["pass"] = all_pass;
    report["checks"] = std::move(checks);

    const fs::path out = resolve_out_dir(opt);
    write_text(out / "report.json", report.dump(2) + "\n");
    return all_pass ? 0 : 3;
}

// ------------------------------------------------------------ portfolio --

int run_portfolio(const Options& opt) {
    const RunConfig cfg = build_config(opt);
    const MarketSpec market = load_market(opt.input);
    const TrackingSolution tracked = track(market, cfg.solver);

    ordered_json report;
    ordered_json p2 = ordered_json::array();
    for (Eigen::Index i = 0; i < tracked.P2_0.size(); ++i) p2.push_back(tracked.P2_0(i));
    report["P2_per_regime"] = std::move(p2);
    report["value_at_x0"] = tracking_value(tracked, market);
    report["x0_above_target"] = tracked.x0_above_target;

    ordered_json gains = ordered_json::array();
    for (int i = 0; i < market.gen.ell; ++i) {
        ordered_json g = ordered_json::array();
        const auto row = tracked.policy.neg_gain[static_cast<std::size_t>(i)].row(0);
        for (Eigen::Index c = 0; c < row.size(); ++c) g.push_back(row(c));
        gains.push_back(std::move(g));
    }
    report["neg_gain_at_0"] = std::move(gains);

    ordered_json checks = ordered_json::array();
    auto push_check = [&](const std::string& name, double expected, double got) {
        checks.push_back({{"name", name},
                          {"expected", expected},
                          {"got", got},
                          {"abs_err", std::abs(expected - got)}});
    };
    try {
        const double expected = closed_form_single(market);
        push_check("closed_form_single", expected, tracked.P2_0(market.i0));
    } catch (const Error& e) {
        if (e.code() != Errc::PreconditionViolated) throw;
    }
    try {
        const Eigen::Vector2d expected = closed_form_two_regime(market);
        push_check("closed_form_two_regime_1", expected(0), tracked.P2_0(0));
        push_check("closed_form_two_regime_2", expected(1), tracked.P2_0(1));
    } catch (const Error& e) {
        if (e.code() != Errc::PreconditionViolated) throw;
    }
    report["closed_form_checks"] = std::move(checks);

    const fs::path out = resolve_out_dir(opt);
    write_text(out / "tracking.json", report.dump(2) + "\n");

    std::cout << "P2(0," << market.i0 + 1 << ") = " << tracked.P2_0(market.i0)
              << ", value at x0 = " << report["value_at_x0"].get<double>() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cone-constrained stochastic LQ solver with regime switching"};
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--input", opt.input, "input spec file (JSON)")->required();
        cmd->add_option("--out", opt.out_dir,
                        "output directory (default: $CONELQ_OUT_DIR or .)");
        cmd->add_option("--seed", opt.seed, "random seed");
        cmd->add_option("--set", opt.overrides, "config override key=value (repeatable)");
        cmd->add_option("--paths", opt.paths, "Monte Carlo path count");
        cmd->add_option("--dt", opt.dt, "Euler step");
        cmd->add_option("--horizon", opt.horizon, "initial solve horizon");
    };

    CLI::App* solve = app.add_subcommand("solve", "solve the coupled Riccati system");
    add_common(solve);
    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo closed-loop cost");
    add_common(simulate);
    simulate->add_flag("--dump-paths", opt.dump_paths, "write per-path costs CSV");
    CLI::App* verify = app.add_subcommand("verify", "run the property suite");
    add_common(verify);
    CLI::App* portfolio = app.add_subcommand("portfolio", "wealth-tracking pipeline");
    add_common(portfolio);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (solve->parsed()) return run_solve(opt);
        if (simulate->parsed()) return run_simulate(opt);
        if (verify->parsed()) return run_verify(opt);
        if (portfolio->parsed()) return run_portfolio(opt);
    } catch (const Error& e) {
        ordered_json err;
        err["error"] = {{"code", errc_name(e.code())}, {"message", e.what()}};
        std::cout << err.dump(2) << "\n";
        return exit_bucket(e.code());
    } catch (const std::exception& e) {
        ordered_json err;
        err["error"] = {{"code", "INTERNAL"}, {"message", e.what()}};
        std::cout << err.dump(2) << "\n";
        return 4;
    }
    return 2;
}
