#pragma once

#include "conelq/model.hpp"

namespace conelq {

/// Which of the two constrained Hamiltonians to evaluate: Plus pairs with
/// the positive part of the state (linear term +2v's), Minus with the
/// negative part (linear term -2v's).
enum class Branch { Plus = 1, Minus = 2 };

/// Euclidean projection onto the cone. FullSpace is the identity, the
/// orthant clamps componentwise, Generated cones solve a nonnegative
/// least-squares problem over generator weights by active-set iteration.
VectorXd project_cone(const ConstraintCone& cone, const VectorXd& p);

/// Projection with the conic weights exposed: point == generators * weights
/// for Generated cones (and weights == point for the orthant). Reusing the
/// weights lets callers rebuild cone members without a second solve.
struct ConeProjection {
    VectorXd point;
    VectorXd weights;
};

ConeProjection project_cone_weights(const ConstraintCone& cone, const VectorXd& p);

double cone_distance(const ConstraintCone& cone, const VectorXd& p);

/// Upper-triangular factor Rt with Rt'Rt = P D'D + R + aI, positive diagonal.
/// Throws NotPositiveDefinite when the side condition fails.
MatrixXd factor_weight(double P, const CoefficientCell& cell, double a);

struct HamiltonianEval {
    double value = 0.0;      // constrained minimum; nonpositive since 0 is feasible
    VectorXd minimizer;      // attaining point, inside the cone
    MatrixXd weight_factor;  // the Rt used for the change of metric
};

/// Constrained Hamiltonian: minimum over the cone of
///   v'(P D'D + R + aI)v +/- 2 v'(P B + P D'C),
/// evaluated exactly by completing the square and projecting onto the
/// image cone Rt*Gamma. Scalar controls take a closed-form path.
HamiltonianEval eval_hamiltonian(Branch branch, double P, const CoefficientCell& cell,
                                 const ConstraintCone& cone, double a);

/// Value-only variant for integrator hot loops; identical arithmetic to
/// eval_hamiltonian without materializing the minimizer.
double hamiltonian_value(Branch branch, double P, const CoefficientCell& cell,
                         const ConstraintCone& cone, double a);

/// Face-enumeration oracle for eval_hamiltonian: exact minimum over every
/// coordinate face (orthant) or generator subset (Generated). Test oracle;
/// independent of the projection path. Requires m <= 4 and at most 6
/// generators, else FaceLimitExceeded.
double brute_force_hamiltonian(Branch branch, double P, const CoefficientCell& cell,
                               const ConstraintCone& cone, double a);

}  // namespace conelq
