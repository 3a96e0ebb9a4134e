#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dipoletree/data.hpp"
#include "dipoletree/errors.hpp"

namespace dipoletree {

enum class HazardFamily { constant_rate, weibull };

// Per-subject hazard rate beta0 + <beta, phi(X)> over the quadratic feature
// map phi(X) = (X_1..X_p, pairwise products, squares). Censoring combines an
// exponential clock at rate exp(alpha0) with a fixed follow-up horizon.
struct HazardSpec {
    double beta0 = 1.0;
    Eigen::VectorXd beta;
    double alpha0 = -std::numeric_limits<double>::infinity();  // -inf disables
    double follow_up = 1e30;
    HazardFamily family = HazardFamily::constant_rate;
    double weibull_shape = 1.5;
};

struct SimConfig {
    int n = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    std::uint64_t seed = 0;
    HazardSpec hazard;
};

inline int quad_feature_dim(int p) { return 2 * p + p * (p - 1) / 2; }

// Layout: linear terms, then cross products x_i x_j (i < j, lexicographic),
// then squares.
inline Eigen::VectorXd quad_features(const Eigen::VectorXd& x) {
    const int p = static_cast<int>(x.size());
    Eigen::VectorXd phi(quad_feature_dim(p));
    int k = 0;
    for (int i = 0; i < p; ++i) phi(k++) = x(i);
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j) phi(k++) = x(i) * x(j);
    for (int i = 0; i < p; ++i) phi(k++) = x(i) * x(i);
    return phi;
}

namespace simdetail {

// Portable uniform in (0, 1) and Box-Muller normal so datasets reproduce
// bit-for-bit under a fixed seed.
inline double uniform01(std::mt19937_64& rng) {
    double u;
    do {
        u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    } while (u <= 0.0 || u >= 1.0);
    return u;
}

inline double standard_normal(std::mt19937_64& rng) {
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline std::mt19937_64 subject_rng(std::uint64_t seed, int subject) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(subject)};
    return std::mt19937_64(seq);
}

}  // namespace simdetail

// Draw a right-censored sample. Covariates with a non-positive hazard rate
// are redrawn (up to 100 times) so the intended level-set geometry survives.
// Subject draws use counter-based seeding and are fully deterministic.
inline Dataset simulate(const SimConfig& cfg) {
    if (cfg.n < 2) throw DataError("simulate: need n >= 2");
    const int p = static_cast<int>(cfg.mean.size());
    if (cfg.cov.rows() != p || cfg.cov.cols() != p)
        throw DataError("simulate: covariance dimension mismatch");
    if (cfg.hazard.beta.size() != quad_feature_dim(p))
        throw DataError("simulate: hazard coefficient length mismatch");

    const Eigen::LLT<Eigen::MatrixXd> llt(cfg.cov);
    if (llt.info() != Eigen::Success)
        throw NumericalError("simulate: covariance not positive semi-definite");
    const Eigen::MatrixXd chol = llt.matrixL();

    const double censor_rate =
        std::isfinite(cfg.hazard.alpha0) ? std::exp(cfg.hazard.alpha0) : 0.0;

    std::vector<Observation> obs;
    obs.reserve(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
        std::mt19937_64 rng = simdetail::subject_rng(cfg.seed, i);

        Eigen::VectorXd x(p);
        double rate = 0.0;
        bool ok = false;
        for (int attempt = 0; attempt < 100; ++attempt) {
            Eigen::VectorXd z(p);
            for (int j = 0; j < p; ++j) z(j) = simdetail::standard_normal(rng);
            x = cfg.mean + chol * z;
            rate = cfg.hazard.beta0 + cfg.hazard.beta.dot(quad_features(x));
            if (rate > 0.0) {
                ok = true;
                break;
            }
        }
        if (!ok)
            throw NumericalError("simulate: hazard rate stayed non-positive after 100 draws");

        const double e = -std::log(simdetail::uniform01(rng));
        const double t_event = cfg.hazard.family == HazardFamily::constant_rate
                                   ? e / rate
                                   : std::pow(e / rate, 1.0 / cfg.hazard.weibull_shape);
        const double t_censor = censor_rate > 0.0
                                    ? -std::log(simdetail::uniform01(rng)) / censor_rate
                                    : std::numeric_limits<double>::infinity();

        Observation o;
        o.covariates = x;
        o.time = std::min({t_event, t_censor, cfg.hazard.follow_up});
        o.status = t_event <= std::min(t_censor, cfg.hazard.follow_up) ? 1 : 0;
        obs.push_back(std::move(o));
    }
    return make_dataset(obs);
}

// Named hazard geometries used throughout evaluation. Covariates follow the
// alternating pattern mean (1,2,1,2,...), variance (1,2,1,2,...); the p = 2
// case is N((1,2), diag(1,2)).
inline SimConfig preset(const std::string& name, int p) {
    if (p != 2 && p != 4 && p != 7)
        throw DataError("preset: p must be one of {2, 4, 7}");

    SimConfig cfg;
    cfg.mean.resize(p);
    cfg.cov = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) {
        cfg.mean(i) = i % 2 == 0 ? 1.0 : 2.0;
        cfg.cov(i, i) = i % 2 == 0 ? 1.0 : 2.0;
    }
    const auto var = [&](int i) { return cfg.cov(i, i); };

    const int d = quad_feature_dim(p);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
    double beta0 = 0.0;
    HazardFamily family = HazardFamily::constant_rate;

    // Index helpers into the quadratic feature layout.
    const auto sq = [&](int i) { return p + p * (p - 1) / 2 + i; };
    const auto lin = [&](int i) { return i; };
    // Adds a (x_i - mean_i)^2 term: expands into square, linear and constant.
    const auto add_centered_square = [&](int i, double a) {
        beta(sq(i)) += a;
        beta(lin(i)) += -2.0 * a * cfg.mean(i);
        beta0 += a * cfg.mean(i) * cfg.mean(i);
    };

    if (name == "planar") {
        beta0 = 0.5;
        for (int i = 0; i < p; ++i) beta(lin(i)) = (i % 2 == 0 ? 0.5 : 0.3) * 2.0 / p;
    } else if (name == "parabolic") {
        beta0 = 0.25;
        add_centered_square(0, 0.5 * 2.0 / p);
        for (int i = 1; i < p; ++i) beta(lin(i)) = 0.25 * 2.0 / p;
    } else if (name == "elliptical" || name == "weibull-elliptical") {
        beta0 = 0.15;
        for (int i = 0; i < p; ++i) add_centered_square(i, (1.0 / var(i)) * (1.0 / p));
        if (name == "weibull-elliptical") family = HazardFamily::weibull;
    } else if (name == "hyperbolic") {
        beta0 = 0.45;
        add_centered_square(0, 0.5 * 2.0 / p);
        add_centered_square(1, -0.15 * 2.0 / p);
        for (int i = 2; i < p; ++i) add_centered_square(i, 0.2 * 2.0 / p / var(i));
    } else {
        throw DataError("preset: unknown name '" + name + "'");
    }

    cfg.hazard.beta0 = beta0;
    cfg.hazard.beta = beta;
    cfg.hazard.family = family;
    cfg.hazard.alpha0 = std::log(0.12);
    cfg.hazard.follow_up = 6.0;
    cfg.n = 500;
    return cfg;
}

}  // namespace dipoletree
