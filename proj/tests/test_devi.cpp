#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "linssp/devi.hpp"
#include "linssp/env.hpp"

using namespace linssp;

namespace {

const SyntheticSSP& instance()
{
    static const SyntheticSSP env(4, 0.25, 1.0 / 12.0);
    return env;
}

const ConstraintSet& constraints()
{
    static const ConstraintSet set = ConstraintSet::from_env(instance());
    return set;
}

Matrix random_spd(std::size_t d, std::mt19937_64& rng, double cond = 5.0)
{
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(d, d);
    for (auto& x : m.reshaped()) x = g(rng);
    const Eigen::HouseholderQR<Matrix> qr(m);
    const Matrix q = qr.householderQ();
    Vector ev(d);
    for (std::size_t i = 0; i < d; ++i) ev(i) = 1.0 + (cond - 1.0) * double(i) / double(d - 1);
    return q * ev.asDiagonal() * q.transpose();
}

// Brute force: min <theta, phi> over ellipsoid intersect the synthetic polytope by a grid
// on the free coordinates theta_{1:3} (theta_4 = 1 is forced) at the given resolution.
double grid_min(const ConfidenceEllipsoid& ell, const Vector& phi, double h)
{
    Vector half(3);
    for (int i = 0; i < 3; ++i) half(i) = ell.radius * std::sqrt(ell.shape_inv(i, i));
    double best = std::numeric_limits<double>::infinity();
    Vector theta(4);
    theta(3) = 1.0;
    const Vector lo = (ell.center.head(3) - half).cwiseMax(-0.25);
    const Vector hi = (ell.center.head(3) + half).cwiseMin(0.25);
    for (double x = lo(0); x <= hi(0); x += h)
        for (double y = lo(1); y <= hi(1); y += h)
            for (double z = lo(2); z <= hi(2); z += h) {
                theta(0) = x;
                theta(1) = y;
                theta(2) = z;
                if (std::abs(x) + std::abs(y) + std::abs(z) > 0.25) continue;
                if (!ell.contains(theta)) continue;
                best = std::min(best, theta.dot(phi));
            }
    return best;
}

}  // namespace

TEST(ConstraintSet, SyntheticStructure)
{
    const auto& set = constraints();
    EXPECT_FALSE(set.trivially_empty);
    EXPECT_TRUE(set.contains(instance().theta_star()));
    Vector off = instance().theta_star();
    off(3) = 1.1;
    EXPECT_FALSE(set.contains(off));
    Vector edge = Vector::Zero(4);
    edge << 0.2, -0.1, 0.0, 1.0;  // l1 norm 0.3 > delta: some action leaves negative mass
    EXPECT_FALSE(set.contains(edge));
}

TEST(Feasibility, CenteredAtThetaStar)
{
    std::mt19937_64 rng(1);
    for (double r : {1e-6, 0.01, 1.0, 1e4}) {
        const ConfidenceEllipsoid ell(instance().theta_star(), random_spd(4, rng), r);
        const FeasibilityResult res = feasibility_check(ell, constraints());
        EXPECT_EQ(res.status, FeasibilityStatus::feasible) << "radius " << r;
        ASSERT_TRUE(res.witness.has_value());
        EXPECT_LT((*res.witness - instance().theta_star()).norm(), 1e-15);
    }
}

TEST(Feasibility, SeparatedTinyEllipsoid)
{
    Vector center = instance().theta_star();
    center(3) += 1.0;  // normalization violated by 1
    const ConfidenceEllipsoid ell(center, Matrix::Identity(4, 4), 1e-6);
    const FeasibilityResult res = feasibility_check(ell, constraints());
    EXPECT_NE(res.status, FeasibilityStatus::feasible);
    EXPECT_THROW(EllipsoidPolytopeProgram(ell, constraints()).minimize(Vector::Ones(4)), InfeasibleProgram);
}

TEST(Feasibility, SeparatedInFreeCoordinates)
{
    Vector center = Vector::Zero(4);
    center << 0.3, 0.3, 0.0, 1.0;
    const ConfidenceEllipsoid ell(center, Matrix::Identity(4, 4), 0.05);
    EXPECT_EQ(feasibility_check(ell, constraints()).status, FeasibilityStatus::infeasible);
}

TEST(OptimisticMin, SingletonAndZero)
{
    const ConfidenceEllipsoid ell(instance().theta_star(), Matrix::Identity(4, 4), 0.0);
    const std::vector<double> values{2.0, 0.0};
    for (ActionId a = 0; a < instance().num_actions(); ++a) {
        const Vector phi = instance().feature_expectation(values, SyntheticSSP::kInit, a);
        const double truth = instance().theta_star().dot(phi);
        EXPECT_NEAR(optimistic_min(ell, constraints(), phi, SolverMode::exact, 3.0), truth, 1e-12);
        EXPECT_NEAR(optimistic_min(ell, constraints(), phi, SolverMode::fast, 3.0), truth, 1e-12);
    }
    const ConfidenceEllipsoid wide(instance().theta_star(), Matrix::Identity(4, 4), 0.1);
    EXPECT_NEAR(optimistic_min(wide, constraints(), Vector::Zero(4), SolverMode::exact, 3.0), 0.0, 1e-12);
    EXPECT_EQ(optimistic_min(wide, constraints(), Vector::Zero(4), SolverMode::fast, 3.0), 0.0);
}

TEST(OptimisticMin, ExactAgainstGridSearch)
{
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    const double h = 1e-3;
    int checked = 0;
    int binding = 0;
    for (int trial = 0; trial < 4; ++trial) {
        // Center near the boundary of the polytope so both constraint families bind.
        Vector center(4);
        center << 0.15, -0.05 * trial, 0.02, 1.0;
        const Matrix shape = random_spd(4, rng, 4.0) * 400.0;
        const ConfidenceEllipsoid ell(center, shape, 1.5);
        const EllipsoidPolytopeProgram prog(ell, constraints());
        ASSERT_TRUE(prog.feasible());
        for (ActionId a : {ActionId{0}, ActionId{5}}) {
            const std::vector<double> values{u(rng), 0.0};
            const Vector phi = instance().feature_expectation(values, SyntheticSSP::kInit, a);
            const double exact = prog.minimize(phi);
            const double grid = grid_min(ell, phi, h);
            const double fast = optimistic_min(ell, constraints(), phi, SolverMode::fast, 3.0);
            EXPECT_GE(exact, fast - 1e-9);
            EXPECT_GE(grid, exact - 1e-9);
            EXPECT_LE(grid - exact, phi.head(3).norm() * std::sqrt(3.0) * h + 1e-9);
            if (exact > std::max(0.0, ell.min_linear(phi)) + 1e-6) ++binding;
            ++checked;
        }
    }
    EXPECT_EQ(checked, 8);
    EXPECT_GT(binding, 0);
}

TEST(OptimisticMin, OptimisticWhenThetaStarCovered)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix shape = random_spd(4, rng);
        std::normal_distribution<double> g(0.0, 0.02);
        Vector center = instance().theta_star();
        for (int i = 0; i < 3; ++i) center(i) += g(rng);
        const ConfidenceEllipsoid ell(center, shape, 0.1);
        if (!ell.contains(instance().theta_star())) continue;
        const std::vector<double> values{u(rng), 0.0};
        const Vector phi = instance().feature_expectation(values, SyntheticSSP::kInit, rng() % 8);
        const double truth = instance().theta_star().dot(phi);
        const double exact = optimistic_min(ell, constraints(), phi, SolverMode::exact, 3.0);
        const double fast = optimistic_min(ell, constraints(), phi, SolverMode::fast, 3.0);
        EXPECT_LE(exact, truth + 1e-9);
        EXPECT_LE(fast, truth + 1e-9);
        EXPECT_GE(exact, fast - 1e-9);
    }
}

TEST(Devi, SingletonFixedPoints)
{
    const ConfidenceEllipsoid ell(instance().theta_star(), Matrix::Identity(4, 4), 0.0);
    for (SolverMode mode : {SolverMode::exact, SolverMode::fast}) {
        DeviOptions opts;
        opts.epsilon = 1e-9;
        opts.v_max = 10.0;
        opts.mode = mode;
        opts.q = 0.0;
        const DeviResult r0 = devi(instance(), ell, constraints(), opts);
        ASSERT_TRUE(r0.converged);
        EXPECT_NEAR(r0.V[SyntheticSSP::kInit], 3.0, 1e-6);
        opts.q = 0.1;
        const DeviResult r1 = devi(instance(), ell, constraints(), opts);
        ASSERT_TRUE(r1.converged);
        EXPECT_NEAR(r1.V[SyntheticSSP::kInit], 2.5, 1e-6);
        EXPECT_EQ(r1.V[SyntheticSSP::kGoal], 0.0);
        // The greedy action maximizes the exit probability.
        EXPECT_EQ(r1.Q.argmin(SyntheticSSP::kInit), instance().num_actions() - 1);
    }
}

TEST(Devi, InfeasibleGivesZero)
{
    Vector center = instance().theta_star();
    center(3) += 1.0;
    const ConfidenceEllipsoid ell(center, Matrix::Identity(4, 4), 1e-6);
    DeviOptions opts;
    opts.mode = SolverMode::exact;
    const DeviResult r = devi(instance(), ell, constraints(), opts);
    EXPECT_FALSE(r.feasible);
    EXPECT_NE(r.feasibility, FeasibilityStatus::feasible);
    for (StateId s = 0; s < 2; ++s)
        for (ActionId a = 0; a < instance().num_actions(); ++a) EXPECT_EQ(r.Q(s, a), 0.0);
}

TEST(Devi, ContractionAndMonotonicityInExactMode)
{
    std::mt19937_64 rng(8);
    for (double q : {0.05, 0.2, 0.5}) {
        const ConfidenceEllipsoid ell(instance().theta_star(), random_spd(4, rng) * 50.0, 0.5);
        DeviOptions opts;
        opts.mode = SolverMode::exact;
        opts.q = q;
        opts.epsilon = 1e-7;
        opts.v_max = 3.0;
        const DeviResult r = devi(instance(), ell, constraints(), opts);
        ASSERT_TRUE(r.converged);
        EXPECT_TRUE(r.contracts(1.0 - q, 1e-8));
        for (std::size_t i = 1; i < r.sup_norm_changes.size(); ++i)
            EXPECT_LE(r.sup_norm_changes[i], (1.0 - q) * r.sup_norm_changes[i - 1] + 1e-8);

        ValueTable prev(2, 0.0);
        for (std::size_t n = 1; n <= 15; ++n) {
            opts.max_iterations = n;
            const DeviResult part = devi(instance(), ell, constraints(), opts);
            for (StateId s = 0; s < 2; ++s) EXPECT_GE(part.V[s], prev[s] - 1e-9);
            prev = part.V;
        }
        opts.max_iterations = 0;
    }
}

TEST(Devi, OptimisticAndBounded)
{
    std::mt19937_64 rng(12);
    for (SolverMode mode : {SolverMode::exact, SolverMode::fast}) {
        for (int trial = 0; trial < 5; ++trial) {
            const ConfidenceEllipsoid ell(instance().theta_star(), random_spd(4, rng) * 20.0, 0.3 + trial);
            DeviOptions opts;
            opts.mode = mode;
            opts.q = 0.01;
            opts.epsilon = 1e-4;
            opts.v_max = 3.0;
            const DeviResult r = devi(instance(), ell, constraints(), opts);
            ASSERT_TRUE(r.converged);
            EXPECT_EQ(r.V[SyntheticSSP::kGoal], 0.0);
            EXPECT_LE(r.V[SyntheticSSP::kInit], 3.0 + opts.epsilon);
            EXPECT_LE(r.V[SyntheticSSP::kInit], 1.0 + opts.v_max);
            for (StateId s = 0; s < 2; ++s)
                for (ActionId a = 0; a < instance().num_actions(); ++a) EXPECT_GE(r.Q(s, a), 0.0);
        }
    }
}

TEST(Devi, IterationCap)
{
    DeviOptions opts;
    opts.q = 0.0;
    EXPECT_EQ(devi_iteration_cap(opts), 1'000'000u);
    opts.q = 0.5;
    opts.epsilon = 1e-3;
    opts.v_max = 3.0;
    EXPECT_EQ(devi_iteration_cap(opts), static_cast<std::size_t>(std::ceil(std::log(3000.0) / 0.5) * 10));
    opts.max_iterations = 7;
    EXPECT_EQ(devi_iteration_cap(opts), 7u);
}

TEST(Devi, RejectsBadOptions)
{
    const ConfidenceEllipsoid ell(instance().theta_star(), Matrix::Identity(4, 4), 0.0);
    DeviOptions opts;
    opts.q = 1.5;
    EXPECT_THROW(devi(instance(), ell, constraints(), opts), std::invalid_argument);
    opts.q = 0.1;
    opts.epsilon = 0.0;
    EXPECT_THROW(devi(instance(), ell, constraints(), opts), std::invalid_argument);
}
