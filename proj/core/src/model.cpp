#include "conelq/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace conelq {

namespace {

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

std::string row_label(int i) { return std::to_string(i + 1); }

}  // namespace

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::Io: return "IO";
        case Errc::BadInput: return "BAD_INPUT";
        case Errc::NegativeOffDiagonal: return "NEGATIVE_OFF_DIAGONAL";
        case Errc::RowSumNonzero: return "ROW_SUM_NONZERO";
        case Errc::StabilityViolated: return "STABILITY_VIOLATED";
        case Errc::UnsupportedCase: return "UNSUPPORTED_CASE";
        case Errc::PreconditionViolated: return "PRECONDITION_VIOLATED";
        case Errc::IllPosed: return "ILL_POSED";
        case Errc::NotPositiveDefinite: return "NOT_POSITIVE_DEFINITE";
        case Errc::NonConvergence: return "NON_CONVERGENCE";
        case Errc::FaceLimitExceeded: return "FACE_LIMIT_EXCEEDED";
        case Errc::SideConditionViolated: return "SIDE_CONDITION_VIOLATED";
        case Errc::StepTooLarge: return "STEP_TOO_LARGE";
        case Errc::MaxRoundsExceeded: return "MAX_ROUNDS_EXCEEDED";
        case Errc::NewtonDiverged: return "NEWTON_DIVERGED";
        case Errc::NegativeRoot: return "NEGATIVE_ROOT";
        case Errc::SingularSystem: return "SINGULAR_SYSTEM";
        case Errc::MonotonicityViolated: return "MONOTONICITY_VIOLATED";
        case Errc::PositivityViolated: return "POSITIVITY_VIOLATED";
        case Errc::NoDecay: return "NO_DECAY";
        case Errc::ExplodedPath: return "EXPLODED_PATH";
    }
    return "UNKNOWN";
}

const char* case_name(ProblemCase c) {
    switch (c) {
        case ProblemCase::Standard: return "standard";
        case ProblemCase::Singular: return "singular";
        case ProblemCase::Unsupported: return "unsupported";
    }
    return "unknown";
}

void validate_generator(const RegimeGenerator& gen) {
    if (gen.ell < 1) fail(Errc::BadInput, "regime count must be >= 1");
    if (gen.rates.rows() != gen.ell || gen.rates.cols() != gen.ell)
        fail(Errc::BadInput, "generator matrix must be ell x ell");
    if (!all_finite(gen.rates)) fail(Errc::BadInput, "generator has non-finite entries");

    for (int i = 0; i < gen.ell; ++i) {
        for (int j = 0; j < gen.ell; ++j) {
            if (i != j && gen.rates(i, j) < 0.0)
                fail(Errc::NegativeOffDiagonal,
                     "generator row " + row_label(i) + " has negative off-diagonal rate q(" +
                         row_label(i) + "," + row_label(j) + ")");
        }
        const double row_sum = gen.rates.row(i).sum();
        if (std::abs(row_sum) > 1e-12)
            fail(Errc::RowSumNonzero,
                 "generator row " + row_label(i) + " sums to " + std::to_string(row_sum));
    }
}

bool cone_is_symmetric(const ConstraintCone& cone, double tol) {
    switch (cone.kind) {
        case ConstraintCone::Kind::FullSpace:
            return true;
        case ConstraintCone::Kind::NonnegativeOrthant:
            return false;
        case ConstraintCone::Kind::Generated: {
            const auto& g = cone.generators;
            for (int j = 0; j < g.cols(); ++j) {
                bool negated_present = false;
                for (int k = 0; k < g.cols(); ++k) {
                    // scale-invariant: look for a column parallel to -g_j
                    const double nj = g.col(j).norm();
                    const double nk = g.col(k).norm();
                    if (nj == 0.0 || nk == 0.0) continue;
                    if ((g.col(k) / nk + g.col(j) / nj).norm() <= tol) {
                        negated_present = true;
                        break;
                    }
                }
                if (!negated_present) return false;
            }
            return true;
        }
    }
    return false;
}

void validate_spec(const ProblemSpec& spec) {
    validate_generator(spec.gen);

    const auto& cs = spec.coeffs;
    if (cs.m < 1 || cs.n < 1) fail(Errc::BadInput, "dimensions m, n must be >= 1");
    if (static_cast<int>(cs.cells.size()) != spec.gen.ell)
        fail(Errc::BadInput, "coefficient regime count does not match the generator");
    if (cs.breakpoints.empty()) fail(Errc::BadInput, "breakpoints must be nonempty");
    if (cs.breakpoints.front() != 0.0)
        fail(Errc::BadInput, "first breakpoint must be 0");
    if (!std::is_sorted(cs.breakpoints.begin(), cs.breakpoints.end()) ||
        std::adjacent_find(cs.breakpoints.begin(), cs.breakpoints.end()) !=
            cs.breakpoints.end())
        fail(Errc::BadInput, "breakpoints must be strictly ascending");
    for (double b : cs.breakpoints)
        if (!std::isfinite(b)) fail(Errc::BadInput, "non-finite breakpoint");

    for (std::size_t i = 0; i < cs.cells.size(); ++i) {
        if (cs.cells[i].size() != cs.breakpoints.size())
            fail(Errc::BadInput, "regime " + row_label(static_cast<int>(i)) +
                                     " segment count does not match breakpoints");
        for (const auto& c : cs.cells[i]) {
            if (!std::isfinite(c.A) || !std::isfinite(c.Q))
                fail(Errc::BadInput, "non-finite scalar coefficient");
            if (c.B.size() != cs.m || c.C.size() != cs.n)
                fail(Errc::BadInput, "B must be length m and C length n");
            if (c.D.rows() != cs.n || c.D.cols() != cs.m)
                fail(Errc::BadInput, "D must be n x m");
            if (c.R.rows() != cs.m || c.R.cols() != cs.m)
                fail(Errc::BadInput, "R must be m x m");
            if (!all_finite(c.B) || !all_finite(c.C) || !all_finite(c.D) || !all_finite(c.R))
                fail(Errc::BadInput, "non-finite coefficient entry");
            if ((c.R - c.R.transpose()).cwiseAbs().maxCoeff() > 1e-12)
                fail(Errc::BadInput, "R must be symmetric");
        }
    }

    if (spec.cone.kind == ConstraintCone::Kind::Generated) {
        if (spec.cone.generators.rows() != cs.m)
            fail(Errc::BadInput, "cone generators must have m rows");
        for (int j = 0; j < spec.cone.generators.cols(); ++j)
            if (spec.cone.generators.col(j).norm() == 0.0)
                fail(Errc::BadInput, "cone generator column " + row_label(j) + " is zero");
    }

    if (spec.i0 < 0 || spec.i0 >= spec.gen.ell)
        fail(Errc::BadInput, "initial regime out of range");
    if (!std::isfinite(spec.x0)) fail(Errc::BadInput, "non-finite initial state");
}

AssumptionReport check_assumptions(const ProblemSpec& spec) {
    validate_spec(spec);

    constexpr double kEigTol = 1e-10;

    double worst_drift = -std::numeric_limits<double>::infinity();  // max of 2A + C'C
    double min_eig_R = std::numeric_limits<double>::infinity();
    double min_eig_DtD = std::numeric_limits<double>::infinity();
    double min_Q = std::numeric_limits<double>::infinity();
    double max_Q = -std::numeric_limits<double>::infinity();

    for (const auto& regime : spec.coeffs.cells) {
        for (const auto& c : regime) {
            worst_drift = std::max(worst_drift, 2.0 * c.A + c.C.squaredNorm());
            min_Q = std::min(min_Q, c.Q);
            max_Q = std::max(max_Q, c.Q);

            Eigen::SelfAdjointEigenSolver<MatrixXd> er(c.R);
            min_eig_R = std::min(min_eig_R, er.eigenvalues().minCoeff());

            MatrixXd dtd = c.D.transpose() * c.D;
            Eigen::SelfAdjointEigenSolver<MatrixXd> ed(dtd);
            min_eig_DtD = std::min(min_eig_DtD, ed.eigenvalues().minCoeff());
        }
    }

    AssumptionReport rep;
    rep.rho = -worst_drift;
    if (rep.rho <= 0.0)
        fail(Errc::StabilityViolated,
             "2A + C'C reaches " + std::to_string(worst_drift) +
                 "; no positive stability margin exists");

    rep.c1 = max_Q;
    rep.p_upper = rep.c1 / rep.rho;

    if (min_eig_R > kEigTol && min_Q >= -kEigTol) {
        rep.kind = ProblemCase::Standard;
        rep.delta = min_eig_R;
    } else if (min_eig_R >= -kEigTol && min_eig_DtD > kEigTol && min_Q > kEigTol) {
        rep.kind = ProblemCase::Singular;
        rep.delta = std::min(min_eig_DtD, min_Q);
    } else {
        rep.kind = ProblemCase::Unsupported;
        rep.delta = 0.0;
    }
    return rep;
}

int segment_index(const CoefficientSet& coeffs, double t) {
    if (t < 0.0) fail(Errc::PreconditionViolated, "time must be nonnegative");
    auto it = std::upper_bound(coeffs.breakpoints.begin(), coeffs.breakpoints.end(), t);
    return static_cast<int>(it - coeffs.breakpoints.begin()) - 1;
}

const CoefficientCell& coefficients_at(const ProblemSpec& spec, double t, int regime) {
    if (regime < 0 || regime >= spec.gen.ell)
        fail(Errc::PreconditionViolated, "regime index out of range");
    return spec.coeffs.cells[static_cast<std::size_t>(regime)]
                           [static_cast<std::size_t>(segment_index(spec.coeffs, t))];
}

}  // namespace conelq
