#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "dipoletree/data.hpp"
#include "dipoletree/errors.hpp"
#include "dipoletree/kernel.hpp"
#include "dipoletree/qp.hpp"

namespace dipoletree {

// Uniform hinge margin shared by all observations.
struct Margin {
    double epsilon = 1.0;
};

// phi+ = max(0, eps - f), phi- = max(0, eps + f) for a point's surface value f.
inline std::pair<double, double> hinge_pair(double v_dot_z, double epsilon) {
    return {std::max(0.0, epsilon - v_dot_z), std::max(0.0, epsilon + v_dot_z)};
}

// Which of the two penalty variants each dipole receives, relative to a
// fixed surface. Pure dipoles compare the sum of surface values, mixed
// dipoles the difference; ties count as positive.
struct OrientationAssignment {
    std::vector<IndexPair> pure_pos, pure_neg, mixed_pos, mixed_neg;
};

inline OrientationAssignment orient_dipoles(const DipoleLabels& labels,
                                            const Eigen::VectorXd& f) {
    OrientationAssignment a;
    for (const auto& [j, k] : labels.pure) {
        (f(j) + f(k) >= 0.0 ? a.pure_pos : a.pure_neg).emplace_back(j, k);
    }
    for (const auto& [j, k] : labels.mixed) {
        (f(j) - f(k) >= 0.0 ? a.mixed_pos : a.mixed_neg).emplace_back(j, k);
    }
    return a;
}

template <typename F>
OrientationAssignment orient_dipoles(const DipoleLabels& labels, const Eigen::MatrixXd& points,
                                     F&& f) {
    Eigen::VectorXd vals(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) vals(i) = f(points.row(i).transpose());
    return orient_dipoles(labels, vals);
}

// Per-point aggregation of the oriented dipole penalties into hinge weights.
struct BetaWeights {
    Eigen::VectorXd beta_plus;
    Eigen::VectorXd beta_minus;
};

inline BetaWeights beta_weights(const OrientationAssignment& assign, int n,
                                double price = 1.0) {
    BetaWeights b{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (const auto& [j, k] : assign.pure_pos) {
        b.beta_plus(j) += price;
        b.beta_plus(k) += price;
    }
    for (const auto& [j, k] : assign.pure_neg) {
        b.beta_minus(j) += price;
        b.beta_minus(k) += price;
    }
    for (const auto& [j, k] : assign.mixed_pos) {
        b.beta_plus(j) += price;
        b.beta_minus(k) += price;
    }
    for (const auto& [j, k] : assign.mixed_neg) {
        b.beta_minus(j) += price;
        b.beta_plus(k) += price;
    }
    return b;
}

// Ridge-regularized splitting criterion: 1/2 <w,w> plus the kappa-weighted
// hinge penalties. `w_norm2` is w.w for an explicit hyperplane (slopes only)
// or c'Kc for a fitted surface; `f` holds the surface values per point.
inline double regularized_criterion(double w_norm2, const Eigen::VectorXd& f,
                                    const BetaWeights& betas, double kappa,
                                    double epsilon) {
    double hinges = 0.0;
    for (Eigen::Index j = 0; j < f.size(); ++j) {
        hinges += betas.beta_plus(j) * std::max(0.0, epsilon - f(j)) +
                  betas.beta_minus(j) * std::max(0.0, epsilon + f(j));
    }
    return 0.5 * w_norm2 + kappa * hinges;
}

inline double regularized_criterion(double w0, const Eigen::VectorXd& w,
                                    const Eigen::MatrixXd& points, const BetaWeights& betas,
                                    double kappa, double epsilon) {
    const Eigen::VectorXd f = (points * w).array() + w0;
    return regularized_criterion(w.squaredNorm(), f, betas, kappa, epsilon);
}

// The dual QP over stacked (mu+, mu-). Variables with a zero upper bound are
// pinned at 0 and dropped; `plus_index` / `minus_index` map the remaining
// variables back to node-point indices.
struct DualAssembly {
    QpProblem qp;
    std::vector<int> plus_index;
    std::vector<int> minus_index;
};

inline DualAssembly assemble_dual(const BetaWeights& betas, const Eigen::MatrixXd& gram,
                                  double kappa, double epsilon) {
    if (!(kappa > 0.0)) throw DataError("assemble_dual: kappa must be > 0");
    const int n = static_cast<int>(gram.rows());
    DualAssembly out;
    for (int j = 0; j < n; ++j)
        if (kappa * betas.beta_plus(j) > 0.0) out.plus_index.push_back(j);
    for (int j = 0; j < n; ++j)
        if (kappa * betas.beta_minus(j) > 0.0) out.minus_index.push_back(j);

    const Eigen::Index np = static_cast<Eigen::Index>(out.plus_index.size());
    const Eigen::Index nm = static_cast<Eigen::Index>(out.minus_index.size());
    const Eigen::Index m = np + nm;
    if (m == 0) throw DegenerateSplitError("assemble_dual: all dipole weights are zero");

    QpProblem& qp = out.qp;
    qp.P.resize(m, m);
    qp.q = Eigen::VectorXd::Constant(m, epsilon);
    qp.a.resize(m);
    qp.lower = Eigen::VectorXd::Zero(m);
    qp.upper.resize(m);

    const auto point = [&](Eigen::Index v) {
        return v < np ? out.plus_index[static_cast<std::size_t>(v)]
                      : out.minus_index[static_cast<std::size_t>(v - np)];
    };
    const auto sign = [&](Eigen::Index v) { return v < np ? 1.0 : -1.0; };

    for (Eigen::Index v = 0; v < m; ++v) {
        qp.a(v) = sign(v);
        qp.upper(v) = v < np ? kappa * betas.beta_plus(point(v))
                             : kappa * betas.beta_minus(point(v));
        for (Eigen::Index w = v; w < m; ++w) {
            const double val = sign(v) * sign(w) * gram(point(v), point(w));
            qp.P(v, w) = val;
            qp.P(w, v) = val;
        }
    }
    return out;
}

namespace splitdetail {

inline void scatter_solution(const QpSolution& sol, const DualAssembly& asmb,
                             Eigen::VectorXd& mu_plus, Eigen::VectorXd& mu_minus) {
    mu_plus.setZero();
    mu_minus.setZero();
    const Eigen::Index np = static_cast<Eigen::Index>(asmb.plus_index.size());
    for (Eigen::Index v = 0; v < np; ++v) mu_plus(asmb.plus_index[v]) = sol.mu(v);
    for (std::size_t v = 0; v < asmb.minus_index.size(); ++v)
        mu_minus(asmb.minus_index[v]) = sol.mu(np + static_cast<Eigen::Index>(v));
}

inline Eigen::VectorXd gather_warm(const DualAssembly& asmb, const Eigen::VectorXd& mu_plus,
                                   const Eigen::VectorXd& mu_minus) {
    const Eigen::Index np = static_cast<Eigen::Index>(asmb.plus_index.size());
    Eigen::VectorXd warm(np + static_cast<Eigen::Index>(asmb.minus_index.size()));
    for (Eigen::Index v = 0; v < np; ++v) warm(v) = mu_plus(asmb.plus_index[v]);
    for (std::size_t v = 0; v < asmb.minus_index.size(); ++v)
        warm(np + static_cast<Eigen::Index>(v)) = mu_minus(asmb.minus_index[v]);
    return warm;
}

}  // namespace splitdetail

// KKT-based intercept recovery. Free support vectors pin the intercept
// exactly; with none free, the KKT inequalities still bracket it and the
// bracket midpoint is returned.
inline double recover_intercept(const Eigen::VectorXd& mu_plus,
                                const Eigen::VectorXd& mu_minus, const BetaWeights& betas,
                                const Eigen::VectorXd& g, double kappa, double epsilon) {
    const Eigen::Index n = g.size();
    double cand_sum = 0.0;
    int cand_count = 0;
    double lb = -std::numeric_limits<double>::infinity();
    double ub = std::numeric_limits<double>::infinity();

    for (Eigen::Index j = 0; j < n; ++j) {
        const double up = kappa * betas.beta_plus(j);
        if (up > 0.0) {
            const double band = 1e-7 * std::max(1.0, up);
            if (mu_plus(j) > band && mu_plus(j) < up - band) {
                cand_sum += epsilon - g(j);
                ++cand_count;
            } else if (mu_plus(j) <= band) {
                lb = std::max(lb, epsilon - g(j));
            } else {
                ub = std::min(ub, epsilon - g(j));
            }
        }
        const double um = kappa * betas.beta_minus(j);
        if (um > 0.0) {
            const double band = 1e-7 * std::max(1.0, um);
            if (mu_minus(j) > band && mu_minus(j) < um - band) {
                cand_sum += -epsilon - g(j);
                ++cand_count;
            } else if (mu_minus(j) <= band) {
                ub = std::min(ub, -epsilon - g(j));
            } else {
                lb = std::max(lb, -epsilon - g(j));
            }
        }
    }

    if (cand_count > 0) return cand_sum / cand_count;
    const bool lb_fin = std::isfinite(lb), ub_fin = std::isfinite(ub);
    if (lb_fin && ub_fin) return 0.5 * (lb + ub);
    if (lb_fin) return std::max(lb, 0.0);
    if (ub_fin) return std::min(ub, 0.0);
    return 0.0;
}

// One node's fitted splitting surface, represented through its dual
// coefficients c_j = mu+_j - mu-_j on the support points.
struct SupportPoint {
    Eigen::VectorXd x;
    double coefficient = 0.0;
};

struct SplitModel {
    std::vector<SupportPoint> support;
    double intercept = 0.0;
    KernelSpec kernel;
    double kappa = 1.0;
    double epsilon = 1.0;
    double objective = 0.0;
    std::vector<double> criterion_path;  // per-round criterion values, diagnostics only

    int rounds() const { return static_cast<int>(criterion_path.size()) - 1; }
};

inline double decision_value(const SplitModel& model, const Eigen::VectorXd& x) {
    double v = model.intercept;
    for (const auto& s : model.support) {
        if (s.x.size() != x.size()) throw DataError("decision_value: dimension mismatch");
        v += s.coefficient * kernel_eval(model.kernel, s.x, x);
    }
    return v;
}

struct Hyperplane {
    double w0 = 0.0;
    Eigen::VectorXd w;
    int covariate = 0;
    double criterion = 0.0;
};

namespace splitdetail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace splitdetail

// Initial univariate guess: for each covariate, the axis-aligned hyperplane
// through its median, scored by the self-oriented regularized criterion.
// Ties resolve to the lowest covariate index.
inline Hyperplane initial_hyperplane(const Eigen::MatrixXd& points,
                                     const DipoleLabels& labels, double kappa,
                                     double epsilon) {
    const int n = static_cast<int>(points.rows());
    const int p = static_cast<int>(points.cols());
    if (p < 1) throw DataError("initial_hyperplane: no covariates");

    Hyperplane best;
    for (int q = 0; q < p; ++q) {
        std::vector<double> col(points.col(q).data(), points.col(q).data() + n);
        const double w0 = -splitdetail::median(std::move(col));
        const Eigen::VectorXd f = points.col(q).array() + w0;
        const BetaWeights betas = beta_weights(orient_dipoles(labels, f), n);
        const double crit = regularized_criterion(1.0, f, betas, kappa, epsilon);
        if (q == 0 || crit < best.criterion) {
            best.w0 = w0;
            best.w = Eigen::VectorXd::Unit(p, q);
            best.covariate = q;
            best.criterion = crit;
        }
    }
    return best;
}

// Recursive reorientation and optimization: orient dipoles, solve the
// kernelized dual, recover the intercept, reorient against the new surface,
// and repeat until the self-oriented criterion stabilizes. The recorded
// criterion sequence is nonincreasing up to solver tolerance.
inline SplitModel fit_split(const Dataset& node, const DipoleLabels& labels,
                            const KernelSpec& kernel, double kappa, Margin margin = {},
                            double tau_rel = 1e-5, int max_rounds = 25,
                            const SolverConfig& qp_cfg = {}) {
    if (labels.pure.empty() && labels.mixed.empty())
        throw DegenerateSplitError("fit_split: no labeled dipole");
    const int n = node.n();
    const double epsilon = margin.epsilon;
    const Eigen::MatrixXd gram = gram_matrix(kernel, node.x);

    const Hyperplane init = initial_hyperplane(node.x, labels, kappa, epsilon);
    Eigen::VectorXd f = (node.x * init.w).array() + init.w0;
    BetaWeights betas = beta_weights(orient_dipoles(labels, f), n);
    double psi_prev = regularized_criterion(1.0, f, betas, kappa, epsilon);

    std::vector<double> path{psi_prev};
    const double tau = tau_rel * psi_prev;

    Eigen::VectorXd mu_plus = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd mu_minus = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    double w0 = 0.0;

    for (int round = 0; round < max_rounds; ++round) {
        const DualAssembly asmb = assemble_dual(betas, gram, kappa, epsilon);
        const Eigen::VectorXd warm = splitdetail::gather_warm(asmb, mu_plus, mu_minus);
        const QpSolution sol = solve(asmb.qp, qp_cfg, &warm);
        if (sol.status == QpStatus::infeasible)
            throw NumericalError("fit_split: infeasible dual");
        splitdetail::scatter_solution(sol, asmb, mu_plus, mu_minus);

        c = mu_plus - mu_minus;
        const Eigen::VectorXd g = gram * c;
        w0 = recover_intercept(mu_plus, mu_minus, betas, g, kappa, epsilon);
        f = g.array() + w0;

        betas = beta_weights(orient_dipoles(labels, f), n);
        const double psi = regularized_criterion(c.dot(g), f, betas, kappa, epsilon);
        path.push_back(psi);
        const bool done = std::abs(psi - psi_prev) <= tau;
        psi_prev = psi;
        if (done) break;
    }

    SplitModel model;
    model.intercept = w0;
    model.kernel = kernel;
    model.kappa = kappa;
    model.epsilon = epsilon;
    model.objective = psi_prev;
    model.criterion_path = std::move(path);
    const double c_scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    for (int j = 0; j < n; ++j) {
        if (std::abs(c(j)) > 1e-12 * c_scale)
            model.support.push_back({node.x.row(j).transpose(), c(j)});
    }
    return model;
}

}  // namespace dipoletree
