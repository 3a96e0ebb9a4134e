#pragma once

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <string>

#include "dipoletree/data.hpp"
#include "dipoletree/errors.hpp"

namespace dipoletree {

enum class KernelKind { linear, polynomial, gaussian };

struct KernelSpec {
    KernelKind kind = KernelKind::linear;
    int degree = 1;       // polynomial only, >= 1
    double offset = 0.0;  // polynomial only, >= 0
    double variance = 1.0;  // gaussian only, > 0

    static KernelSpec linear() { return {}; }
    static KernelSpec polynomial(int degree, double offset) {
        if (degree < 1) throw DataError("kernel: polynomial degree must be >= 1");
        if (offset < 0.0) throw DataError("kernel: polynomial offset must be >= 0");
        return {KernelKind::polynomial, degree, offset, 1.0};
    }
    // The quadratic kernel (u.v + 1)^2.
    static KernelSpec quadratic() { return polynomial(2, 1.0); }
    static KernelSpec gaussian(double variance) {
        if (!(variance > 0.0)) throw DataError("kernel: gaussian variance must be > 0");
        return {KernelKind::gaussian, 1, 0.0, variance};
    }

    std::string describe() const {
        switch (kind) {
            case KernelKind::linear: return "linear";
            case KernelKind::polynomial:
                return "poly:" + std::to_string(degree) + "," + std::to_string(offset);
            case KernelKind::gaussian: return "gauss:" + std::to_string(variance);
        }
        return "?";
    }
};

inline double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& u,
                          const Eigen::VectorXd& v) {
    if (u.size() != v.size()) throw DataError("kernel: dimension mismatch");
    switch (spec.kind) {
        case KernelKind::linear:
            return u.dot(v);
        case KernelKind::polynomial:
            return std::pow(u.dot(v) + spec.offset, spec.degree);
        case KernelKind::gaussian:
            return std::exp(-(u - v).squaredNorm() / (2.0 * spec.variance));
    }
    return 0.0;
}

// Symmetric Gram matrix over the rows of `points`.
inline Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& points) {
    const Eigen::Index n = points.rows();
    if (n == 0) throw DataError("gram_matrix: empty point list");
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double v =
                kernel_eval(spec, points.row(i).transpose(), points.row(j).transpose());
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

// Mean squared distance to the centroid; the default Gaussian variance.
// Degenerate (all points identical) falls back to 1.
inline double default_gaussian_variance(const Eigen::MatrixXd& points) {
    if (points.rows() == 0) throw DataError("default_gaussian_variance: empty dataset");
    const Eigen::RowVectorXd centroid = points.colwise().mean();
    const double s2 = (points.rowwise() - centroid).rowwise().squaredNorm().mean();
    return s2 > 0.0 ? s2 : 1.0;
}

inline double default_gaussian_variance(const Dataset& d) {
    return default_gaussian_variance(d.x);
}

// A kernel choice parsed from the CLI. A Gaussian kernel without an explicit
// sigma^2 resolves it from the training set at fit time.
struct KernelChoice {
    KernelSpec spec;
    bool auto_sigma = false;

    KernelSpec resolve(const Eigen::MatrixXd& training_points) const {
        if (!auto_sigma) return spec;
        return KernelSpec::gaussian(default_gaussian_variance(training_points));
    }
};

// Accepted forms: linear | quad | poly:d,c | gauss | gauss:sigma2
inline KernelChoice parse_kernel(const std::string& text) {
    if (text == "linear") return {KernelSpec::linear(), false};
    if (text == "quad") return {KernelSpec::quadratic(), false};
    if (text == "gauss") return {KernelSpec::gaussian(1.0), true};
    if (text.rfind("gauss:", 0) == 0) {
        const double s2 = std::stod(text.substr(6));
        return {KernelSpec::gaussian(s2), false};
    }
    if (text.rfind("poly:", 0) == 0) {
        const std::string args = text.substr(5);
        const auto comma = args.find(',');
        if (comma == std::string::npos)
            throw DataError("kernel: expected poly:d,c, got '" + text + "'");
        const int d = std::stoi(args.substr(0, comma));
        const double c = std::stod(args.substr(comma + 1));
        return {KernelSpec::polynomial(d, c), false};
    }
    throw DataError("kernel: unknown spec '" + text + "'");
}

}  // namespace dipoletree
