#include "conelq/cone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace conelq {

namespace {

/// Lawson-Hanson active-set iteration for min |G w - p| subject to w >= 0.
/// Exact in finitely many steps for faces of full column rank; the cap
/// guards cycling on ill-conditioned generator sets.
VectorXd nnls(const MatrixXd& G, const VectorXd& p, int max_iter) {
    const int k = static_cast<int>(G.cols());
    VectorXd w = VectorXd::Zero(k);
    if (k == 0) return w;

    std::vector<bool> passive(static_cast<std::size_t>(k), false);
    const double grad_tol = 1e-12 * std::max(1.0, (G.transpose() * p).cwiseAbs().maxCoeff());

    auto solve_passive = [&]() {
        std::vector<int> idx;
        for (int j = 0; j < k; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        VectorXd z = VectorXd::Zero(k);
        if (idx.empty()) return z;
        MatrixXd Gp(G.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c)
            Gp.col(static_cast<Eigen::Index>(c)) = G.col(idx[c]);
        VectorXd zp = Gp.completeOrthogonalDecomposition().solve(p);
        for (std::size_t c = 0; c < idx.size(); ++c) z(idx[c]) = zp(static_cast<Eigen::Index>(c));
        return z;
    };

    int iter = 0;
    while (iter++ < max_iter) {
        VectorXd gradient = G.transpose() * (p - G * w);
        int best = -1;
        double best_g = grad_tol;
        for (int j = 0; j < k; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && gradient(j) > best_g) {
                best_g = gradient(j);
                best = j;
            }
        }
        if (best < 0) return w;  // KKT satisfied
        passive[static_cast<std::size_t>(best)] = true;

        while (iter++ < max_iter) {
            VectorXd z = solve_passive();
            double alpha = 1.0;
            int blocking = -1;
            for (int j = 0; j < k; ++j) {
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
                    const double denom = w(j) - z(j);
                    const double step = denom > 0.0 ? w(j) / denom : 0.0;
                    if (step < alpha) {
                        alpha = step;
                        blocking = j;
                    }
                }
            }
            if (blocking < 0) {
                w = z;
                break;  // interior of the passive face
            }
            w += alpha * (z - w);
            const double zero_tol = 1e-14 * std::max(1.0, w.cwiseAbs().maxCoeff());
            for (int j = 0; j < k; ++j) {
                if (passive[static_cast<std::size_t>(j)] &&
                    (j == blocking || w(j) <= zero_tol)) {
                    w(j) = 0.0;
                    passive[static_cast<std::size_t>(j)] = false;
                }
            }
        }
    }
    fail(Errc::NonConvergence,
         "cone projection active-set iteration exceeded " + std::to_string(max_iter) +
             " rounds; generators are likely ill-conditioned");
}

}  // namespace

ConeProjection project_cone_weights(const ConstraintCone& cone, const VectorXd& p) {
    switch (cone.kind) {
        case ConstraintCone::Kind::FullSpace:
            return {p, p};
        case ConstraintCone::Kind::NonnegativeOrthant: {
            VectorXd q = p.cwiseMax(0.0);
            return {q, q};
        }
        case ConstraintCone::Kind::Generated: {
            const int k = static_cast<int>(cone.generators.cols());
            VectorXd w = nnls(cone.generators, p, 100 * std::max(k, 1));
            return {cone.generators * w, w};
        }
    }
    fail(Errc::BadInput, "unknown cone kind");
}

VectorXd project_cone(const ConstraintCone& cone, const VectorXd& p) {
    return project_cone_weights(cone, p).point;
}

double cone_distance(const ConstraintCone& cone, const VectorXd& p) {
    return (p - project_cone(cone, p)).norm();
}

MatrixXd factor_weight(double P, const CoefficientCell& cell, double a) {
    const int m = static_cast<int>(cell.R.rows());
    MatrixXd M = P * (cell.D.transpose() * cell.D) + cell.R +
                 a * MatrixXd::Identity(m, m);

    Eigen::LLT<MatrixXd> llt(M);
    bool ok = llt.info() == Eigen::Success;
    MatrixXd U;
    if (ok) {
        U = llt.matrixU();
        // reject near-semidefinite factors (diag^2 tracks the eigenvalue scale)
        ok = U.diagonal().minCoeff() > 1e-6;
    }
    if (!ok)
        fail(Errc::NotPositiveDefinite,
             "P D'D + R + aI is not positive definite (P=" + std::to_string(P) +
                 ", a=" + std::to_string(a) + ")");
    return U;
}

namespace {

/// Closed-form scalar minimization used when m == 1: every cone in R is
/// {0}, R+, R-, or R, read off the generator signs.
struct ScalarMin {
    double value;
    double minimizer;
    double factor;  // sqrt of the weight
};

ScalarMin scalar_hamiltonian(Branch branch, double P, const CoefficientCell& cell,
                             const ConstraintCone& cone, double a) {
    const double weight = P * cell.D.col(0).squaredNorm() + cell.R(0, 0) + a;
    if (!(weight > 1e-12))
        fail(Errc::NotPositiveDefinite,
             "P D'D + R + aI is not positive definite (P=" + std::to_string(P) +
                 ", a=" + std::to_string(a) + ")");
    const double s = P * cell.B(0) + P * cell.D.col(0).dot(cell.C);
    const double lin_sign = (branch == Branch::Plus) ? 1.0 : -1.0;
    const double unconstrained = -lin_sign * s / weight;

    bool allow_pos = false, allow_neg = false;
    switch (cone.kind) {
        case ConstraintCone::Kind::FullSpace:
            allow_pos = allow_neg = true;
            break;
        case ConstraintCone::Kind::NonnegativeOrthant:
            allow_pos = true;
            break;
        case ConstraintCone::Kind::Generated:
            for (Eigen::Index j = 0; j < cone.generators.cols(); ++j) {
                if (cone.generators(0, j) > 0.0) allow_pos = true;
                if (cone.generators(0, j) < 0.0) allow_neg = true;
            }
            break;
    }

    double v = unconstrained;
    if (v > 0.0 && !allow_pos) v = 0.0;
    if (v < 0.0 && !allow_neg) v = 0.0;
    return {weight * v * v + 2.0 * lin_sign * v * s, v, std::sqrt(weight)};
}

}  // namespace

double hamiltonian_value(Branch branch, double P, const CoefficientCell& cell,
                         const ConstraintCone& cone, double a) {
    if (cell.R.rows() == 1) return scalar_hamiltonian(branch, P, cell, cone, a).value;
    return eval_hamiltonian(branch, P, cell, cone, a).value;
}

HamiltonianEval eval_hamiltonian(Branch branch, double P, const CoefficientCell& cell,
                                 const ConstraintCone& cone, double a) {
    const int m = static_cast<int>(cell.R.rows());
    if (m == 1) {
        const ScalarMin s = scalar_hamiltonian(branch, P, cell, cone, a);
        HamiltonianEval out;
        out.value = s.value;
        out.minimizer = VectorXd::Constant(1, s.minimizer);
        out.weight_factor = MatrixXd::Constant(1, 1, s.factor);
        return out;
    }
    MatrixXd Rt = factor_weight(P, cell, a);

    VectorXd s = P * cell.B + P * (cell.D.transpose() * cell.C);
    // M^{-1} s via the triangular factor
    VectorXd Minv_s = Rt.transpose().triangularView<Eigen::Lower>().solve(s);
    Minv_s = Rt.triangularView<Eigen::Upper>().solve(Minv_s);

    const double sign = (branch == Branch::Plus) ? -1.0 : 1.0;
    VectorXd target = sign * (Rt * Minv_s);

    HamiltonianEval out;
    out.weight_factor = Rt;

    const double quad = s.dot(Minv_s);

    switch (cone.kind) {
        case ConstraintCone::Kind::FullSpace: {
            out.minimizer = sign * Minv_s;
            out.value = -quad;
            return out;
        }
        case ConstraintCone::Kind::NonnegativeOrthant: {
            // image cone of the orthant under Rt: generated by the columns of Rt
            ConstraintCone image = ConstraintCone::generated(Rt);
            ConeProjection proj = project_cone_weights(image, target);
            out.minimizer = proj.weights;  // weights recover v with Rt v = point
            out.value = (proj.point - target).squaredNorm() - quad;
            return out;
        }
        case ConstraintCone::Kind::Generated: {
            const auto& G = cone.generators;
            MatrixXd image_gens(m, G.cols());
            std::vector<int> kept;
            const double drop_tol = 1e-12 * std::max(1.0, Rt.norm());
            for (int j = 0; j < G.cols(); ++j) {
                VectorXd img = Rt * G.col(j);
                if (img.norm() > drop_tol) {
                    image_gens.col(static_cast<Eigen::Index>(kept.size())) = img;
                    kept.push_back(j);
                }
            }
            image_gens.conservativeResize(m, static_cast<Eigen::Index>(kept.size()));
            ConstraintCone image = ConstraintCone::generated(image_gens);
            ConeProjection proj = project_cone_weights(image, target);

            VectorXd v = VectorXd::Zero(m);
            for (std::size_t c = 0; c < kept.size(); ++c)
                v += proj.weights(static_cast<Eigen::Index>(c)) * G.col(kept[c]);
            out.minimizer = v;
            out.value = (proj.point - target).squaredNorm() - quad;
            return out;
        }
    }
    fail(Errc::BadInput, "unknown cone kind");
}

double brute_force_hamiltonian(Branch branch, double P, const CoefficientCell& cell,
                               const ConstraintCone& cone, double a) {
    const int m = static_cast<int>(cell.R.rows());
    if (m > 4) fail(Errc::FaceLimitExceeded, "face enumeration supports m <= 4");

    MatrixXd M = P * (cell.D.transpose() * cell.D) + cell.R +
                 a * MatrixXd::Identity(m, m);
    VectorXd s = P * cell.B + P * (cell.D.transpose() * cell.C);
    const double lin_sign = (branch == Branch::Plus) ? 1.0 : -1.0;

    auto objective = [&](const VectorXd& v) {
        return v.dot(M * v) + 2.0 * lin_sign * v.dot(s);
    };

    double best = 0.0;  // apex candidate v = 0

    if (cone.kind == ConstraintCone::Kind::FullSpace) {
        VectorXd v = M.ldlt().solve(-lin_sign * s);
        return std::min(best, objective(v));
    }

    // Columns spanning each face: coordinate directions for the orthant,
    // generator subsets otherwise.
    MatrixXd G;
    if (cone.kind == ConstraintCone::Kind::NonnegativeOrthant) {
        G = MatrixXd::Identity(m, m);
    } else {
        G = cone.generators;
        if (G.cols() > 6) fail(Errc::FaceLimitExceeded, "face enumeration supports <= 6 generators");
    }

    const int k = static_cast<int>(G.cols());
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
        std::vector<int> idx;
        for (int j = 0; j < k; ++j)
            if (mask & (1u << j)) idx.push_back(j);

        MatrixXd Gf(m, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c) Gf.col(static_cast<Eigen::Index>(c)) = G.col(idx[c]);

        // stationary point on the face span: (Gf' M Gf) w = -sign Gf' s
        MatrixXd H = Gf.transpose() * M * Gf;
        VectorXd rhs = -lin_sign * (Gf.transpose() * s);
        VectorXd w = H.completeOrthogonalDecomposition().solve(rhs);

        if ((w.array() < -1e-12).any()) continue;  // leaves the cone
        VectorXd v = Gf * w;
        best = std::min(best, objective(v));
    }
    return best;
}

}  // namespace conelq
