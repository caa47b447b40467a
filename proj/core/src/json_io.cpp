#include "conelq/json_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace conelq {

namespace {

using ordered_json = nlohmann::ordered_json;
using nlohmann::json;

json parse_text(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) fail(Errc::BadInput, "malformed JSON");
    return j;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in.good() && !in.eof()) fail(Errc::Io, "cannot read " + path);
    return ss.str();
}

const json& field(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) fail(Errc::BadInput, std::string("missing field '") + name + "'");
    return *it;
}

double number(const json& j, const char* name) {
    const json& f = field(j, name);
    if (!f.is_number()) fail(Errc::BadInput, std::string("field '") + name + "' must be a number");
    return f.get<double>();
}

std::vector<double> number_array(const json& j, const char* name, std::size_t expect) {
    const json& f = field(j, name);
    if (!f.is_array() || f.size() != expect)
        fail(Errc::BadInput, std::string("field '") + name + "' must be an array of " +
                                 std::to_string(expect) + " numbers");
    std::vector<double> out;
    out.reserve(expect);
    for (const auto& v : f) {
        if (!v.is_number()) fail(Errc::BadInput, std::string("field '") + name + "' must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

MatrixXd row_major(const std::vector<double>& flat, int rows, int cols) {
    MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
    return m;
}

std::vector<double> flatten(const MatrixXd& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    return out;
}

VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct Dims {
    int m = 0, n = 0, ell = 0;
};

Dims parse_dims(const json& j) {
    const json& d = field(j, "dims");
    Dims out;
    out.m = static_cast<int>(number(d, "m"));
    out.n = static_cast<int>(number(d, "n"));
    out.ell = static_cast<int>(number(d, "ell"));
    if (out.m < 1 || out.n < 1 || out.ell < 1)
        fail(Errc::BadInput, "dims must be positive");
    return out;
}

RegimeGenerator parse_generator(const json& j, int ell) {
    RegimeGenerator gen;
    gen.ell = ell;
    gen.rates = row_major(
        number_array(j, "generator", static_cast<std::size_t>(ell) * static_cast<std::size_t>(ell)),
        ell, ell);
    return gen;
}

std::vector<double> parse_breakpoints(const json& j) {
    const json& f = field(j, "breakpoints");
    if (!f.is_array() || f.empty()) fail(Errc::BadInput, "breakpoints must be a nonempty array");
    std::vector<double> out;
    for (const auto& v : f) out.push_back(v.get<double>());
    return out;
}

ConstraintCone parse_cone(const json& j, int m) {
    const json& c = field(j, "cone");
    const std::string variant = field(c, "variant").get<std::string>();
    if (variant == "full_space") return ConstraintCone::full_space();
    if (variant == "nonnegative_orthant") return ConstraintCone::orthant();
    if (variant == "generated") {
        auto it = c.find("generators");
        std::vector<double> flat;
        if (it != c.end())
            for (const auto& v : *it) flat.push_back(v.get<double>());
        if (flat.size() % static_cast<std::size_t>(m) != 0)
            fail(Errc::BadInput, "generators length must be a multiple of m");
        const int k = static_cast<int>(flat.size()) / m;
        return ConstraintCone::generated(row_major(flat, m, k));
    }
    fail(Errc::BadInput, "cone variant must be full_space, nonnegative_orthant or generated");
}

std::pair<double, int> parse_initial(const json& j, int ell) {
    const json& ini = field(j, "initial");
    const double x = number(ini, "x");
    const int regime = static_cast<int>(number(ini, "regime"));
    if (regime < 1 || regime > ell) fail(Errc::BadInput, "initial regime must be in 1..ell");
    return {x, regime - 1};
}

const char* cone_variant_name(const ConstraintCone& cone) {
    switch (cone.kind) {
        case ConstraintCone::Kind::FullSpace: return "full_space";
        case ConstraintCone::Kind::NonnegativeOrthant: return "nonnegative_orthant";
        case ConstraintCone::Kind::Generated: return "generated";
    }
    return "unknown";
}

ordered_json cone_to_json(const ConstraintCone& cone) {
    ordered_json c;
    c["variant"] = cone_variant_name(cone);
    if (cone.kind == ConstraintCone::Kind::Generated)
        c["generators"] = flatten(cone.generators);
    return c;
}

}  // namespace

ProblemSpec parse_problem(const std::string& text) {
    const json j = parse_text(text);
    const Dims dims = parse_dims(j);

    ProblemSpec spec;
    spec.gen = parse_generator(j, dims.ell);
    spec.coeffs.m = dims.m;
    spec.coeffs.n = dims.n;
    spec.coeffs.breakpoints = parse_breakpoints(j);

    const json& co = field(j, "coefficients");
    if (!co.is_array() || static_cast<int>(co.size()) != dims.ell)
        fail(Errc::BadInput, "coefficients must be an array with one entry per regime");
    const std::size_t segs = spec.coeffs.breakpoints.size();
    for (const auto& regime : co) {
        if (!regime.is_array() || regime.size() != segs)
            fail(Errc::BadInput, "each regime needs one coefficient cell per segment");
        std::vector<CoefficientCell> cells;
        for (const auto& seg : regime) {
            CoefficientCell c;
            c.A = number(seg, "A");
            c.B = to_vector(number_array(seg, "B", static_cast<std::size_t>(dims.m)));
            c.C = to_vector(number_array(seg, "C", static_cast<std::size_t>(dims.n)));
            c.D = row_major(number_array(seg, "D", static_cast<std::size_t>(dims.n) *
                                                       static_cast<std::size_t>(dims.m)),
                            dims.n, dims.m);
            c.Q = number(seg, "Q");
            c.R = row_major(number_array(seg, "R", static_cast<std::size_t>(dims.m) *
                                                       static_cast<std::size_t>(dims.m)),
                            dims.m, dims.m);
            cells.push_back(std::move(c));
        }
        spec.coeffs.cells.push_back(std::move(cells));
    }

    spec.cone = parse_cone(j, dims.m);
    std::tie(spec.x0, spec.i0) = parse_initial(j, dims.ell);
    validate_spec(spec);
    return spec;
}

ProblemSpec load_problem(const std::string& path) { return parse_problem(read_file(path)); }

std::string problem_to_json(const ProblemSpec& spec) {
    ordered_json j;
    j["dims"] = {{"m", spec.coeffs.m}, {"n", spec.coeffs.n}, {"ell", spec.gen.ell}};
    j["generator"] = flatten(spec.gen.rates);
    j["breakpoints"] = spec.coeffs.breakpoints;
    ordered_json regimes = ordered_json::array();
    for (const auto& regime : spec.coeffs.cells) {
        ordered_json segs = ordered_json::array();
        for (const auto& c : regime) {
            ordered_json seg;
            seg["A"] = c.A;
            seg["B"] = flatten(c.B);
            seg["C"] = flatten(c.C);
            seg["D"] = flatten(c.D);
            seg["Q"] = c.Q;
            seg["R"] = flatten(c.R);
            segs.push_back(std::move(seg));
        }
        regimes.push_back(std::move(segs));
    }
    j["coefficients"] = std::move(regimes);
    j["cone"] = cone_to_json(spec.cone);
    j["initial"] = {{"x", spec.x0}, {"regime", spec.i0 + 1}};
    return j.dump(2) + "\n";
}

MarketSpec parse_market(const std::string& text) {
    const json j = parse_text(text);
    const Dims dims = parse_dims(j);

    MarketSpec market;
    market.m = dims.m;
    market.n = dims.n;
    market.gen = parse_generator(j, dims.ell);
    market.breakpoints = parse_breakpoints(j);

    const json& mk = field(j, "market");
    if (!mk.is_array() || static_cast<int>(mk.size()) != dims.ell)
        fail(Errc::BadInput, "market must be an array with one entry per regime");
    for (const auto& regime : mk) {
        if (!regime.is_array() || regime.size() != market.breakpoints.size())
            fail(Errc::BadInput, "each regime needs one market cell per segment");
        std::vector<MarketCell> cells;
        for (const auto& seg : regime) {
            MarketCell c;
            c.r = number(seg, "r");
            c.mu = to_vector(number_array(seg, "mu", static_cast<std::size_t>(dims.m)));
            c.sigma = row_major(number_array(seg, "sigma", static_cast<std::size_t>(dims.m) *
                                                               static_cast<std::size_t>(dims.n)),
                                dims.m, dims.n);
            c.rho = number(seg, "rho");
            cells.push_back(std::move(c));
        }
        market.cells.push_back(std::move(cells));
    }

    market.lambda = number(j, "lambda");
    market.d = number(j, "target");
    market.cone = parse_cone(j, dims.m);
    std::tie(market.x0, market.i0) = parse_initial(j, dims.ell);
    validate_market(market);
    return market;
}

MarketSpec load_market(const std::string& path) { return parse_market(read_file(path)); }

std::string market_to_json(const MarketSpec& market) {
    ordered_json j;
    j["dims"] = {{"m", market.m}, {"n", market.n}, {"ell", market.gen.ell}};
    j["generator"] = flatten(market.gen.rates);
    j["breakpoints"] = market.breakpoints;
    ordered_json regimes = ordered_json::array();
    for (const auto& regime : market.cells) {
        ordered_json segs = ordered_json::array();
        for (const auto& c : regime) {
            ordered_json seg;
            seg["r"] = c.r;
            seg["mu"] = flatten(c.mu);
            seg["sigma"] = flatten(c.sigma);
            seg["rho"] = c.rho;
            segs.push_back(std::move(seg));
        }
        regimes.push_back(std::move(segs));
    }
    j["market"] = std::move(regimes);
    j["lambda"] = market.lambda;
    j["target"] = market.d;
    j["cone"] = cone_to_json(market.cone);
    j["initial"] = {{"x", market.x0}, {"regime", market.i0 + 1}};
    return j.dump(2) + "\n";
}

std::string solution_metadata_json(const RiccatiSolution& sol, const SolverConfig& config) {
    ordered_json j;
    j["case"] = case_name(sol.kind);
    j["a_final"] = sol.a_final;
    j["assumptions"] = {{"rho", sol.report.rho},
                        {"delta", sol.report.delta},
                        {"c1", sol.report.c1},
                        {"p_upper", sol.report.p_upper}};
    ordered_json p0 = ordered_json::array(), q0 = ordered_json::array();
    for (Eigen::Index i = 0; i < sol.P1.cols(); ++i) {
        p0.push_back(sol.P1(0, i));
        q0.push_back(sol.P2(0, i));
    }
    j["P1_at_0"] = std::move(p0);
    j["P2_at_0"] = std::move(q0);
    j["config"] = {{"step", config.step},
                   {"horizon0", config.horizon0},
                   {"horizon_growth", config.horizon_growth},
                   {"horizon_tol", config.horizon_tol},
                   {"a0", config.a0},
                   {"a_decay", config.a_decay},
                   {"a_tol", config.a_tol},
                   {"max_rounds", config.max_rounds}};
    j["diagnostics"] = {{"horizon_rounds", sol.diag.horizon_rounds},
                        {"horizon_final", sol.diag.horizon_final},
                        {"horizon_increment", sol.diag.horizon_increment},
                        {"reg_rounds", sol.diag.reg_rounds},
                        {"reg_increment", sol.diag.reg_increment},
                        {"min_value", sol.diag.min_value},
                        {"max_value", sol.diag.max_value},
                        {"side_condition_min", sol.diag.side_condition_min}};
    j["grid_points"] = sol.grid.size();
    j["retained_horizon"] = sol.grid.empty() ? 0.0 : sol.grid.back();
    return j.dump(2) + "\n";
}

std::string cost_estimate_json(const CostEstimate& est) {
    ordered_json j;
    j["mean"] = est.mean;
    j["stderr"] = est.std_error;
    j["tail_bound"] = est.tail_bound;
    j["decay_rate"] = est.decay_rate;
    j["paths"] = est.paths;
    j["dt"] = est.dt;
    j["T"] = est.T;
    j["seed"] = est.seed;
    return j.dump(2) + "\n";
}

}  // namespace conelq
