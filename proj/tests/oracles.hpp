// Test-only oracles, independent of the library's dual/QP solve path.
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracles {

// The explicit-coordinate ridge splitting objective
//   0.5 ||w||^2 + kappa * sum_j [bp_j max(0, e - f_j) + bm_j max(0, e + f_j)]
// with f_j = w0 + w . x_j.
struct PrimalInstance {
    Eigen::MatrixXd x;  // n x p
    Eigen::VectorXd beta_plus;
    Eigen::VectorXd beta_minus;
    double kappa = 1.0;
    double epsilon = 1.0;
};

inline double hinge_total(const PrimalInstance& inst, const Eigen::VectorXd& f) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < f.size(); ++j) {
        s += inst.beta_plus(j) * std::max(0.0, inst.epsilon - f(j)) +
             inst.beta_minus(j) * std::max(0.0, inst.epsilon + f(j));
    }
    return s;
}

// Exact minimization over the intercept for a fixed slope: the hinge sum is
// piecewise linear in w0, so some breakpoint attains the minimum.
inline double best_over_intercept(const PrimalInstance& inst, const Eigen::VectorXd& w,
                                  double* w0_out = nullptr) {
    const Eigen::VectorXd proj = inst.x * w;
    std::vector<double> breakpoints{0.0};
    for (Eigen::Index j = 0; j < proj.size(); ++j) {
        if (inst.beta_plus(j) > 0.0) breakpoints.push_back(inst.epsilon - proj(j));
        if (inst.beta_minus(j) > 0.0) breakpoints.push_back(-inst.epsilon - proj(j));
    }
    double best = std::numeric_limits<double>::infinity();
    double best_w0 = 0.0;
    for (double w0 : breakpoints) {
        const double v = hinge_total(inst, proj.array() + w0);
        if (v < best) {
            best = v;
            best_w0 = w0;
        }
    }
    if (w0_out != nullptr) *w0_out = best_w0;
    return 0.5 * w.squaredNorm() + inst.kappa * best;
}

// Nested grid search over the slope with the intercept minimized exactly,
// then a diminishing-step subgradient polish. Reliable for p <= 3.
inline double primal_minimum(const PrimalInstance& inst, Eigen::VectorXd* w_out = nullptr,
                             double* w0_out = nullptr) {
    const int p = static_cast<int>(inst.x.cols());
    const double budget =
        inst.kappa * inst.epsilon * (inst.beta_plus.sum() + inst.beta_minus.sum());
    double radius = std::sqrt(2.0 * budget) + 1.0;

    Eigen::VectorXd center = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd best_w = center;
    double best = best_over_intercept(inst, center);

    const int grid = p <= 1 ? 65 : (p == 2 ? 33 : 13);
    const int levels = 48;
    Eigen::VectorXi idx(p);
    for (int level = 0; level < levels; ++level) {
        idx.setZero();
        while (true) {
            Eigen::VectorXd w(p);
            for (int d = 0; d < p; ++d)
                w(d) = center(d) + radius * (2.0 * idx(d) / (grid - 1) - 1.0);
            const double v = best_over_intercept(inst, w);
            if (v < best) {
                best = v;
                best_w = w;
            }
            int d = 0;
            while (d < p && ++idx(d) == grid) idx(d++) = 0;
            if (d == p) break;
        }
        center = best_w;
        radius *= 0.5;
    }

    // Subgradient polish around the grid solution.
    Eigen::VectorXd w = best_w;
    double w0 = 0.0;
    best = best_over_intercept(inst, w, &w0);
    best_w = w;
    double step0 = 0.05;
    for (int k = 1; k <= 4000; ++k) {
        const Eigen::VectorXd f = (inst.x * w).array() + w0;
        Eigen::VectorXd g = w;
        for (Eigen::Index j = 0; j < f.size(); ++j) {
            if (inst.beta_plus(j) > 0.0 && inst.epsilon - f(j) > 0.0)
                g -= inst.kappa * inst.beta_plus(j) * inst.x.row(j).transpose();
            if (inst.beta_minus(j) > 0.0 && inst.epsilon + f(j) > 0.0)
                g += inst.kappa * inst.beta_minus(j) * inst.x.row(j).transpose();
        }
        const double gn = g.norm();
        if (gn < 1e-14) break;
        w -= (step0 / (std::sqrt(static_cast<double>(k)) * gn)) * g;
        const double v = best_over_intercept(inst, w, &w0);
        if (v < best) {
            best = v;
            best_w = w;
        }
    }
    if (w_out != nullptr) *w_out = best_w;
    if (w0_out != nullptr) best_over_intercept(inst, best_w, w0_out);
    return best;
}

// Random instance whose betas come from a small random dipole structure,
// mirroring how the splitting dual arises.
inline PrimalInstance random_instance(std::mt19937_64& rng, int max_points = 6,
                                      int max_dim = 2) {
    std::uniform_real_distribution<double> coord(-1.5, 1.5);
    std::uniform_real_distribution<double> kappa_dist(0.2, 2.0);

    PrimalInstance inst;
    const int n = 2 + static_cast<int>(rng() % static_cast<unsigned>(max_points - 1));
    const int p = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_dim));
    inst.x.resize(n, p);
    for (Eigen::Index i = 0; i < inst.x.size(); ++i) inst.x(i) = coord(rng);
    inst.beta_plus = Eigen::VectorXd::Zero(n);
    inst.beta_minus = Eigen::VectorXd::Zero(n);
    inst.kappa = kappa_dist(rng);
    inst.epsilon = 1.0;

    const int dipoles = 1 + static_cast<int>(rng() % 4);
    for (int d = 0; d < dipoles; ++d) {
        const int i = static_cast<int>(rng() % static_cast<unsigned>(n));
        int j = static_cast<int>(rng() % static_cast<unsigned>(n));
        if (i == j) j = (j + 1) % n;
        switch (rng() % 4) {
            case 0:  // pure, positively oriented
                inst.beta_plus(i) += 1.0;
                inst.beta_plus(j) += 1.0;
                break;
            case 1:  // pure, negatively oriented
                inst.beta_minus(i) += 1.0;
                inst.beta_minus(j) += 1.0;
                break;
            case 2:  // mixed, positively oriented
                inst.beta_plus(i) += 1.0;
                inst.beta_minus(j) += 1.0;
                break;
            default:  // mixed, negatively oriented
                inst.beta_minus(i) += 1.0;
                inst.beta_plus(j) += 1.0;
                break;
        }
    }
    return inst;
}

}  // namespace oracles
