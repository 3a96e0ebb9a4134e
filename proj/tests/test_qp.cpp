#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dipoletree/kernel.hpp"
#include "dipoletree/qp.hpp"
#include "dipoletree/splitter.hpp"
#include "oracles.hpp"

using namespace dipoletree;
using Catch::Matchers::WithinAbs;

namespace {

QpProblem worked_mixed_dipole() {
    // One positively oriented mixed dipole at x1 = 1, x2 = -1, linear kernel,
    // epsilon = 1, kappa = 10: variables (mu+_1, mu-_2).
    QpProblem p;
    p.P.resize(2, 2);
    p.P << 1, 1, 1, 1;
    p.q = Eigen::VectorXd::Constant(2, 1.0);
    p.a.resize(2);
    p.a << 1, -1;
    p.lower = Eigen::VectorXd::Zero(2);
    p.upper = Eigen::VectorXd::Constant(2, 10.0);
    return p;
}

}  // namespace

TEST_CASE("qp pinned box") {
    QpProblem p;
    p.P = Eigen::MatrixXd::Identity(2, 2);
    p.q = Eigen::VectorXd::Zero(2);
    p.a = Eigen::VectorXd::Zero(2);
    p.lower = Eigen::VectorXd::Zero(2);
    p.upper = Eigen::VectorXd::Zero(2);
    const QpSolution s = solve(p);
    REQUIRE(s.status == QpStatus::solved);
    REQUIRE_THAT(s.mu.norm(), WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(s.objective, WithinAbs(0.0, 1e-12));
}

TEST_CASE("qp interior optimum in one variable") {
    QpProblem p;
    p.P = Eigen::MatrixXd::Identity(1, 1);
    p.q = Eigen::VectorXd::Constant(1, 1.0);
    p.a = Eigen::VectorXd::Zero(1);
    p.lower = Eigen::VectorXd::Zero(1);
    p.upper = Eigen::VectorXd::Constant(1, 10.0);
    const QpSolution s = solve(p);
    REQUIRE(s.status == QpStatus::solved);
    REQUIRE_THAT(s.mu(0), WithinAbs(1.0, 1e-5));
    REQUIRE_THAT(s.objective, WithinAbs(0.5, 1e-6));
}

TEST_CASE("qp worked mixed-dipole instance") {
    const QpSolution s = solve(worked_mixed_dipole());
    REQUIRE(s.status == QpStatus::solved);
    REQUIRE_THAT(s.mu(0), WithinAbs(0.5, 1e-5));
    REQUIRE_THAT(s.mu(1), WithinAbs(0.5, 1e-5));
    REQUIRE_THAT(s.objective, WithinAbs(0.5, 1e-6));
    REQUIRE_THAT(s.mu(0) - s.mu(1), WithinAbs(0.0, 1e-6));
}

TEST_CASE("qp input validation") {
    QpProblem p = worked_mixed_dipole();
    p.q(0) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(solve(p), NumericalError);

    QpProblem inconsistent = worked_mixed_dipole();
    inconsistent.lower(0) = 11.0;
    REQUIRE(solve(inconsistent).status == QpStatus::infeasible);
}

TEST_CASE("qp iteration cap reports max_iter with the best iterate") {
    SolverConfig cfg;
    cfg.max_iter = 1;
    const QpSolution s = solve(worked_mixed_dipole(), cfg);
    REQUIRE(s.status == QpStatus::max_iter);
    REQUIRE(s.mu.allFinite());
}

TEST_CASE("qp determinism") {
    const QpSolution a = solve(worked_mixed_dipole());
    const QpSolution b = solve(worked_mixed_dipole());
    REQUIRE(a.mu == b.mu);
    REQUIRE(a.objective == b.objective);
    REQUIRE(a.iterations == b.iterations);
}

TEST_CASE("qp solution feasibility on solved status") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const oracles::PrimalInstance inst = oracles::random_instance(rng);
        BetaWeights betas{inst.beta_plus, inst.beta_minus};
        const Eigen::MatrixXd gram = gram_matrix(KernelSpec::linear(), inst.x);
        const DualAssembly asmb = assemble_dual(betas, gram, inst.kappa, inst.epsilon);
        const QpSolution s = solve(asmb.qp);
        REQUIRE(s.status == QpStatus::solved);
        REQUIRE(((s.mu - asmb.qp.lower).array() >= -1e-8).all());
        REQUIRE(((asmb.qp.upper - s.mu).array() >= -1e-8).all());
        REQUIRE(std::abs(asmb.qp.a.dot(s.mu)) <= 1e-6);
    }
}

TEST_CASE("qp permutation invariance") {
    std::mt19937_64 rng(17);
    const oracles::PrimalInstance inst = oracles::random_instance(rng, 6, 2);
    BetaWeights betas{inst.beta_plus, inst.beta_minus};
    const Eigen::MatrixXd gram = gram_matrix(KernelSpec::linear(), inst.x);
    const DualAssembly asmb = assemble_dual(betas, gram, inst.kappa, inst.epsilon);
    const QpSolution base = solve(asmb.qp);

    const Eigen::Index m = asmb.qp.size();
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    QpProblem shuffled;
    shuffled.P.resize(m, m);
    shuffled.q.resize(m);
    shuffled.a.resize(m);
    shuffled.lower.resize(m);
    shuffled.upper.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        shuffled.q(i) = asmb.qp.q(perm[i]);
        shuffled.a(i) = asmb.qp.a(perm[i]);
        shuffled.lower(i) = asmb.qp.lower(perm[i]);
        shuffled.upper(i) = asmb.qp.upper(perm[i]);
        for (Eigen::Index j = 0; j < m; ++j) shuffled.P(i, j) = asmb.qp.P(perm[i], perm[j]);
    }
    const QpSolution s = solve(shuffled);
    REQUIRE_THAT(s.objective, WithinAbs(base.objective, 1e-5));
    for (Eigen::Index i = 0; i < m; ++i)
        REQUIRE_THAT(s.mu(i), WithinAbs(base.mu(perm[i]), 1e-4));
}

TEST_CASE("qp duality gap against the brute-force primal") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 25; ++rep) {
        const oracles::PrimalInstance inst = oracles::random_instance(rng);
        BetaWeights betas{inst.beta_plus, inst.beta_minus};
        const Eigen::MatrixXd gram = gram_matrix(KernelSpec::linear(), inst.x);
        const DualAssembly asmb = assemble_dual(betas, gram, inst.kappa, inst.epsilon);
        const QpSolution s = solve(asmb.qp);
        REQUIRE(s.status == QpStatus::solved);
        const double primal = oracles::primal_minimum(inst);
        REQUIRE_THAT(s.objective, WithinAbs(primal, 1e-4));
    }
}
