#pragma once

#include <Eigen/Dense>
#include <vector>

#include "conelq/errors.hpp"

namespace conelq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Generator of the modulating Markov chain: `ell` states, off-diagonal
/// rates nonnegative, each row summing to zero.
struct RegimeGenerator {
    int ell = 1;
    MatrixXd rates;  // ell x ell, 1/time
};

/// Throws NegativeOffDiagonal / RowSumNonzero naming the offending row
/// (1-based, matching file and report conventions).
void validate_generator(const RegimeGenerator& gen);

/// Model data on one time segment for one regime. All pieces are constant
/// on the segment; values beyond the last breakpoint are held constant.
struct CoefficientCell {
    double A = 0.0;  // state drift, 1/time
    VectorXd B;      // control drift loading, m
    VectorXd C;      // state diffusion loading, n
    MatrixXd D;      // control diffusion loading, n x m
    double Q = 0.0;  // state cost weight
    MatrixXd R;      // control cost weight, m x m symmetric
};

struct CoefficientSet {
    int m = 1;                        // control dimension
    int n = 1;                        // Brownian dimension
    std::vector<double> breakpoints;  // ascending, first entry 0
    std::vector<std::vector<CoefficientCell>> cells;  // [regime][segment]
};

/// Closed convex cone constraining the control.
struct ConstraintCone {
    enum class Kind { FullSpace, NonnegativeOrthant, Generated };

    Kind kind = Kind::FullSpace;
    MatrixXd generators;  // m x k; columns span a Generated cone (k of 0 encodes {0})

    static ConstraintCone full_space() { return {}; }
    static ConstraintCone orthant() {
        return {Kind::NonnegativeOrthant, MatrixXd()};
    }
    static ConstraintCone generated(const MatrixXd& g) {
        return {Kind::Generated, g};
    }
};

/// True when -v belongs to the cone whenever v does.
bool cone_is_symmetric(const ConstraintCone& cone, double tol = 1e-12);

struct ProblemSpec {
    CoefficientSet coeffs;
    RegimeGenerator gen;
    ConstraintCone cone;
    double x0 = 0.0;
    int i0 = 0;  // 0-based regime index (files and reports use 1-based labels)
};

enum class ProblemCase { Standard, Singular, Unsupported };

const char* case_name(ProblemCase c);

/// Outcome of the standing-assumption scan over every grid cell.
struct AssumptionReport {
    double rho = 0.0;    // stability margin: 2A + C'C <= -rho everywhere, 1/time
    ProblemCase kind = ProblemCase::Unsupported;
    double delta = 0.0;  // positivity constant of the satisfied assumption
    double c1 = 0.0;     // sup of the state cost weight
    double p_upper = 0.0;  // c1 / rho, uniform bound on the Riccati curves
};

/// Structural validation: dimensions, breakpoint ordering, finiteness,
/// symmetry of R, cone shape, initial regime range.
void validate_spec(const ProblemSpec& spec);

/// Scans the grid, computes the stability margin rho and classifies the
/// instance. Throws StabilityViolated when rho <= 0. Pure and deterministic.
AssumptionReport check_assumptions(const ProblemSpec& spec);

/// Right-continuous segment lookup: index of the segment containing t,
/// holding the last segment beyond the final breakpoint.
int segment_index(const CoefficientSet& coeffs, double t);

const CoefficientCell& coefficients_at(const ProblemSpec& spec, double t, int regime);

}  // namespace conelq
