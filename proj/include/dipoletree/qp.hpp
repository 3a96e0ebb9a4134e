#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <limits>

#include "dipoletree/errors.hpp"

namespace dipoletree {

// Box-constrained convex QP with a single linear equality:
//
//   maximize    q.mu - 1/2 mu' P mu
//   subject to  a.mu = 0,  lower <= mu <= upper
//
// P is symmetric PSD (a signed Gram matrix in the splitting dual).
struct QpProblem {
    Eigen::MatrixXd P;
    Eigen::VectorXd q;
    Eigen::VectorXd a;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Eigen::Index size() const { return q.size(); }
};

enum class QpStatus { solved, max_iter, infeasible };

struct QpSolution {
    Eigen::VectorXd mu;
    double objective = 0.0;
    int iterations = 0;
    QpStatus status = QpStatus::solved;
};

struct SolverConfig {
    double tol = 1e-6;     // primal/dual residual and equality tolerance
    int max_iter = 20000;
    double rho = 1.0;      // ADMM step parameter
    double alpha = 1.6;    // over-relaxation
};

namespace qpdetail {

// Projection onto {a.x = 0} intersected with the box. The projection is
// clamp(v - lambda a) where lambda is the root of the nonincreasing
// piecewise-linear map lambda -> a.clamp(v - lambda a); bisection finds it
// to machine precision, so bound feasibility is exact and the equality
// residual is negligible.
inline Eigen::VectorXd project_box_hyperplane(const Eigen::VectorXd& v,
                                              const Eigen::VectorXd& a, double a_norm2,
                                              const Eigen::VectorXd& lower,
                                              const Eigen::VectorXd& upper) {
    const auto clamp_at = [&](double lambda) {
        return (v - lambda * a).cwiseMax(lower).cwiseMin(upper).eval();
    };
    if (a_norm2 <= 0.0) return clamp_at(0.0);
    const auto phi = [&](double lambda) { return a.dot(clamp_at(lambda)); };

    double lo = 0.0, hi = 0.0;
    const double at_zero = phi(0.0);
    if (at_zero == 0.0) return clamp_at(0.0);
    if (at_zero > 0.0) {
        hi = 1.0;
        while (phi(hi) > 0.0 && hi < 1e18) hi *= 2.0;
    } else {
        lo = -1.0;
        while (phi(lo) < 0.0 && lo > -1e18) lo *= 2.0;
    }
    for (int it = 0; it < 128; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (phi(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-15 * std::max(1.0, std::abs(lo) + std::abs(hi))) break;
    }
    return clamp_at(0.5 * (lo + hi));
}

}  // namespace qpdetail

// Operator-splitting (ADMM) solve. Deterministic for identical inputs and
// config; `warm` seeds the iterate for sequences of related problems.
inline QpSolution solve(const QpProblem& prob, const SolverConfig& cfg = {},
                        const Eigen::VectorXd* warm = nullptr) {
    const Eigen::Index m = prob.size();
    if (prob.P.rows() != m || prob.P.cols() != m || prob.a.size() != m ||
        prob.lower.size() != m || prob.upper.size() != m)
        throw DataError("qp: inconsistent dimensions");
    if (!prob.P.allFinite() || !prob.q.allFinite() || !prob.a.allFinite() ||
        !prob.lower.allFinite() || !prob.upper.allFinite())
        throw NumericalError("qp: non-finite input");

    QpSolution sol;
    if ((prob.lower.array() > prob.upper.array()).any()) {
        sol.status = QpStatus::infeasible;
        sol.mu = Eigen::VectorXd::Zero(m);
        sol.objective = -std::numeric_limits<double>::infinity();
        return sol;
    }

    // Jitter keeps the factorization stable on rank-deficient Gram matrices.
    const double jitter = 1e-10 * prob.P.trace() / static_cast<double>(m);
    Eigen::MatrixXd M = prob.P;
    M.diagonal().array() += jitter + cfg.rho;
    const Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) throw NumericalError("qp: factorization failed");

    const double a_norm2 = prob.a.squaredNorm();
    Eigen::VectorXd z = warm != nullptr && warm->size() == m
                            ? qpdetail::project_box_hyperplane(*warm, prob.a, a_norm2,
                                                               prob.lower, prob.upper)
                            : qpdetail::project_box_hyperplane(
                                  Eigen::VectorXd::Zero(m), prob.a, a_norm2, prob.lower,
                                  prob.upper);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd x(m), x_hat(m), z_prev(m);

    bool converged = false;
    int it = 0;
    for (; it < cfg.max_iter; ++it) {
        x = llt.solve(prob.q + cfg.rho * (z - u));
        x_hat = cfg.alpha * x + (1.0 - cfg.alpha) * z;
        z_prev = z;
        z = qpdetail::project_box_hyperplane(x_hat + u, prob.a, a_norm2, prob.lower,
                                             prob.upper);
        u += x_hat - z;

        const double r_prim = (x - z).lpNorm<Eigen::Infinity>();
        const double r_dual = cfg.rho * (z - z_prev).lpNorm<Eigen::Infinity>();
        if (r_prim <= cfg.tol && r_dual <= cfg.tol &&
            (a_norm2 <= 0.0 || std::abs(prob.a.dot(z)) <= cfg.tol)) {
            converged = true;
            ++it;
            break;
        }
    }

    sol.mu = z;
    sol.iterations = it;
    sol.status = converged ? QpStatus::solved : QpStatus::max_iter;
    sol.objective = prob.q.dot(sol.mu) - 0.5 * sol.mu.dot(prob.P * sol.mu);
    return sol;
}

}  // namespace dipoletree
