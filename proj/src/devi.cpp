#include "linssp/devi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace linssp {

namespace {

constexpr double kZeroRow = 1e-13;
constexpr double kDecisionMargin = 1e-10;

double truncate_fast(const ConfidenceEllipsoid& ellipsoid, const Vector& phi, double v_max)
{
    return std::clamp(ellipsoid.min_linear(phi), 0.0, v_max);
}

std::vector<long long> row_key(const Vector& row, double rhs)
{
    std::vector<long long> key(static_cast<std::size_t>(row.size()) + 1);
    for (Eigen::Index i = 0; i < row.size(); ++i) key[static_cast<std::size_t>(i)] = std::llround(row(i) * 1e11);
    key.back() = std::llround(rhs * 1e11);
    return key;
}

struct RowBuilder {
    std::vector<Vector> rows;
    std::vector<double> rhs;
    std::set<std::vector<long long>> seen;
    bool equality = false;
    bool empty = false;

    void add(Vector row, double b)
    {
        const double n = row.norm();
        if (n < kZeroRow) {
            if (equality ? std::abs(b) > 1e-12 : b > 1e-12) empty = true;
            return;
        }
        row /= n;
        b /= n;
        if (equality) {
            Eigen::Index first = 0;
            while (std::abs(row(first)) < 1e-15) ++first;
            if (row(first) < 0) {
                row = -row;
                b = -b;
            }
        }
        if (seen.insert(row_key(row, b)).second) {
            rows.push_back(std::move(row));
            rhs.push_back(b);
        }
    }

    void write(Matrix& m, Vector& v, std::size_t d) const
    {
        m.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
        v.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
            v(static_cast<Eigen::Index>(i)) = rhs[i];
        }
    }
};

// min c^T x subject to 1 - (x^T P x + 2 p^T x + p0) > 0 and A x - b > 0.
struct BarrierProblem {
    Matrix P;
    Vector p;
    double p0 = 0.0;
    Matrix A;
    Vector b;
    Vector c;

    double quad_slack(const Vector& x) const { return 1.0 - (x.dot(P * x) + 2.0 * p.dot(x) + p0); }
    std::size_t num_constraints() const { return static_cast<std::size_t>(A.rows()) + 1; }

    bool strictly_feasible(const Vector& x) const
    {
        if (!(quad_slack(x) > 0.0)) return false;
        if (A.rows() == 0) return true;
        return ((A * x - b).array() > 0.0).all();
    }
};

// Path-following barrier method with damped Newton centering. `x` must be strictly
// feasible; returns the final iterate. Stops once the duality-gap bound m/tau is
// below gap_tol.
Vector barrier_minimize(const BarrierProblem& prob, Vector x, double gap_tol)
{
    const double m = static_cast<double>(prob.num_constraints());
    double tau = 1.0;
    constexpr double mu = 10.0;
    constexpr int max_newton = 500;

    while (true) {
        for (int it = 0; it < max_newton; ++it) {
            const double fq = prob.quad_slack(x);
            const Vector grad_q = -2.0 * (prob.P * x + prob.p);
            Vector grad = tau * prob.c - grad_q / fq;
            Matrix hess = grad_q * grad_q.transpose() / (fq * fq) + 2.0 * prob.P / fq;
            if (prob.A.rows() > 0) {
                const Vector slack = prob.A * x - prob.b;
                const Vector inv = slack.cwiseInverse();
                grad.noalias() -= prob.A.transpose() * inv;
                hess.noalias() += prob.A.transpose() * inv.cwiseAbs2().asDiagonal() * prob.A;
            }
            const Eigen::LDLT<Matrix> ldlt(hess);
            const Vector dx = -ldlt.solve(grad);
            const double lambda_sq = -grad.dot(dx);
            if (!(lambda_sq > 1e-20) || !dx.allFinite()) break;
            const double lambda = std::sqrt(lambda_sq);
            double step = lambda > 0.25 ? 1.0 / (1.0 + lambda) : 1.0;
            while (step > 1e-18 && !prob.strictly_feasible(x + step * dx)) step *= 0.5;
            if (step <= 1e-18) break;
            x += step * dx;
            if (lambda_sq < 1e-18) break;
        }
        if (m / tau < gap_tol) break;
        tau *= mu;
        if (tau > 1e300) break;
    }
    return x;
}

}  // namespace

// ---------------------------------------------------------------------------

ConstraintSet ConstraintSet::from_env(const LinearMixtureSSP& env)
{
    const std::size_t S = env.num_states();
    const std::size_t d = env.dim();
    RowBuilder eq;
    eq.equality = true;
    RowBuilder ineq;
    Vector phi(d);
    for (StateId s = 0; s < S; ++s) {
        for (ActionId a = 0; a < env.num_actions(); ++a) {
            Vector total = Vector::Zero(d);
            for (StateId next = 0; next < S; ++next) {
                env.feature(next, s, a, phi);
                total += phi;
                if (s == env.goal())
                    eq.add(phi, next == env.goal() ? 1.0 : 0.0);
                else
                    ineq.add(phi, 0.0);
            }
            if (s != env.goal()) eq.add(total, 1.0);
        }
    }
    ConstraintSet set;
    eq.write(set.equality, set.equality_rhs, d);
    ineq.write(set.inequality, set.inequality_rhs, d);
    set.trivially_empty = eq.empty || ineq.empty;
    return set;
}

bool ConstraintSet::contains(const Vector& theta, double tol) const
{
    if (trivially_empty) return false;
    if (equality.rows() > 0 && ((equality * theta - equality_rhs).cwiseAbs().array() > tol).any()) return false;
    if (inequality.rows() > 0 && ((inequality * theta - inequality_rhs).array() < -tol).any()) return false;
    return true;
}

const char* to_string(FeasibilityStatus status)
{
    switch (status) {
        case FeasibilityStatus::feasible:
            return "feasible";
        case FeasibilityStatus::infeasible:
            return "infeasible";
        case FeasibilityStatus::stalled:
            return "stalled";
    }
    return "unknown";
}

const char* to_string(SolverMode mode)
{
    return mode == SolverMode::exact ? "exact" : "fast";
}

// ---------------------------------------------------------------------------

EllipsoidPolytopeProgram::EllipsoidPolytopeProgram(const ConfidenceEllipsoid& ellipsoid,
                                                   const ConstraintSet& constraints)
{
    const auto d = static_cast<Eigen::Index>(ellipsoid.dim());
    if (static_cast<Eigen::Index>(constraints.dim()) != d)
        throw std::invalid_argument("ellipsoid and constraint set dimensions differ");

    auto mark = [this](FeasibilityStatus status) { feasibility_.status = status; };

    if (constraints.trivially_empty) {
        mark(FeasibilityStatus::infeasible);
        return;
    }

    // Singleton ellipsoid: the center is the only candidate.
    if (ellipsoid.radius == 0.0) {
        if (constraints.contains(ellipsoid.center)) {
            point_ = ellipsoid.center;
            feasibility_.witness = ellipsoid.center;
            mark(FeasibilityStatus::feasible);
        } else {
            mark(FeasibilityStatus::infeasible);
        }
        return;
    }

    // Parametrize the equality rows as theta = theta0 + N z.
    if (constraints.equality.rows() > 0) {
        Eigen::JacobiSVD<Matrix> svd(constraints.equality, Eigen::ComputeFullV | Eigen::ComputeFullU);
        svd.setThreshold(1e-10);
        const Eigen::Index rank = svd.rank();
        theta0_ = svd.solve(constraints.equality_rhs);
        const double residual = (constraints.equality * theta0_ - constraints.equality_rhs).norm();
        if (residual > 1e-9 * (1.0 + constraints.equality_rhs.norm())) {
            mark(FeasibilityStatus::infeasible);
            return;
        }
        null_ = svd.matrixV().rightCols(d - rank);
    } else {
        theta0_ = Vector::Zero(d);
        null_ = Matrix::Identity(d, d);
    }
    const auto k = null_.cols();

    const double r_sq = ellipsoid.radius * ellipsoid.radius;
    const Vector offset = theta0_ - ellipsoid.center;

    if (k == 0) {
        if (ellipsoid.contains(theta0_, 1e-12 * (1.0 + ellipsoid.radius)) && constraints.contains(theta0_)) {
            point_ = theta0_;
            feasibility_.witness = theta0_;
            mark(FeasibilityStatus::feasible);
        } else {
            mark(FeasibilityStatus::infeasible);
        }
        return;
    }

    quad_ = null_.transpose() * ellipsoid.shape * null_ / r_sq;
    lin_quad_ = null_.transpose() * (ellipsoid.shape * offset) / r_sq;
    const_quad_ = offset.dot(ellipsoid.shape * offset) / r_sq;

    const Eigen::LLT<Matrix> quad_llt(quad_);
    if (quad_llt.info() != Eigen::Success) throw ModelError("reduced ellipsoid is not positive definite");
    const Vector z_center = -quad_llt.solve(lin_quad_);
    const double center_slack = 1.0 - (z_center.dot(quad_ * z_center) + 2.0 * lin_quad_.dot(z_center) + const_quad_);
    if (center_slack < -1e-12) {
        feasibility_.margin = center_slack;
        mark(FeasibilityStatus::infeasible);
        return;
    }

    // Reduced inequalities; rows that vanish on the subspace are checked as constants.
    std::vector<Vector> rows;
    std::vector<double> rhs;
    for (Eigen::Index i = 0; i < constraints.inequality.rows(); ++i) {
        Vector row = null_.transpose() * constraints.inequality.row(i).transpose();
        const double b = constraints.inequality_rhs(i) - constraints.inequality.row(i).dot(theta0_);
        const double n = row.norm();
        if (n < 1e-12) {
            if (b > 1e-9) {
                mark(FeasibilityStatus::infeasible);
                return;
            }
            continue;
        }
        rows.push_back(row / n);
        rhs.push_back(b / n);
    }
    rows_.resize(static_cast<Eigen::Index>(rows.size()), k);
    rhs_.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows_.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        rhs_(static_cast<Eigen::Index>(i)) = rhs[i];
    }

    // Phase I: maximize the smallest slack, i.e. minimize s subject to slack + s > 0.
    BarrierProblem phase1;
    phase1.P = Matrix::Zero(k + 1, k + 1);
    phase1.P.topLeftCorner(k, k) = quad_;
    phase1.p = Vector::Zero(k + 1);
    phase1.p.head(k) = lin_quad_;
    phase1.p(k) = -0.5;
    phase1.p0 = const_quad_;
    phase1.A = Matrix::Ones(rows_.rows(), k + 1);
    phase1.A.leftCols(k) = rows_;
    phase1.b = rhs_;
    phase1.c = Vector::Zero(k + 1);
    phase1.c(k) = 1.0;

    double worst = center_slack;
    if (rows_.rows() > 0) worst = std::min(worst, (rows_ * z_center - rhs_).minCoeff());
    Vector x0(k + 1);
    x0.head(k) = z_center;
    x0(k) = std::max(0.0, -worst) + 1.0;

    const Vector x = barrier_minimize(phase1, x0, 1e-12);
    const Vector z = x.head(k);
    double margin = 1.0 - (z.dot(quad_ * z) + 2.0 * lin_quad_.dot(z) + const_quad_);
    if (rows_.rows() > 0) margin = std::min(margin, (rows_ * z - rhs_).minCoeff());
    feasibility_.margin = margin;

    if (margin > kDecisionMargin) {
        start_ = z;
        mark(FeasibilityStatus::feasible);
        if (constraints.contains(ellipsoid.center))
            feasibility_.witness = ellipsoid.center;
        else
            feasibility_.witness = Vector(theta0_ + null_ * z);
    } else if (margin < -kDecisionMargin) {
        mark(FeasibilityStatus::infeasible);
    } else {
        mark(FeasibilityStatus::stalled);
    }
}

double EllipsoidPolytopeProgram::minimize(const Vector& phi) const
{
    if (!feasible())
        throw InfeasibleProgram(std::string("optimistic minimization over a set that is ") +
                                to_string(feasibility_.status));
    if (point_) return point_->dot(phi);

    const double base = theta0_.dot(phi);
    const Vector g = null_.transpose() * phi;
    const double gn = g.norm();
    if (gn <= 1e-15 * (1.0 + phi.norm())) return base;
    const Vector unit = g / gn;

    std::vector<long long> key(static_cast<std::size_t>(unit.size()));
    for (Eigen::Index i = 0; i < unit.size(); ++i) key[static_cast<std::size_t>(i)] = std::llround(unit(i) * 1e12);
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return base + gn * it->second;
    }
    const double value = solve_direction(unit);
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        cache_.emplace(std::move(key), value);
    }
    return base + gn * value;
}

double EllipsoidPolytopeProgram::solve_direction(const Vector& unit) const
{
    BarrierProblem phase2;
    phase2.P = quad_;
    phase2.p = lin_quad_;
    phase2.p0 = const_quad_;
    phase2.A = rows_;
    phase2.b = rhs_;
    phase2.c = unit;
    const Vector z = barrier_minimize(phase2, start_, 1e-10);
    return unit.dot(z);
}

FeasibilityResult feasibility_check(const ConfidenceEllipsoid& ellipsoid, const ConstraintSet& constraints)
{
    return EllipsoidPolytopeProgram(ellipsoid, constraints).feasibility();
}

double optimistic_min(const ConfidenceEllipsoid& ellipsoid, const ConstraintSet& constraints,
                      const Vector& phi, SolverMode mode, double v_max)
{
    if (mode == SolverMode::fast) return truncate_fast(ellipsoid, phi, v_max);
    return EllipsoidPolytopeProgram(ellipsoid, constraints).minimize(phi);
}

// ---------------------------------------------------------------------------

bool DeviResult::contracts(double factor, double slack) const
{
    for (std::size_t i = 1; i < sup_norm_changes.size(); ++i)
        if (sup_norm_changes[i] > factor * sup_norm_changes[i - 1] + slack) return false;
    return true;
}

std::size_t devi_iteration_cap(const DeviOptions& opts)
{
    if (opts.max_iterations > 0) return opts.max_iterations;
    if (opts.q <= 0.0) return 1'000'000;
    const double raw = std::ceil(std::max(1.0, std::log(opts.v_max / opts.epsilon)) / opts.q) * 10.0;
    return static_cast<std::size_t>(std::min(raw, 1e9));
}

DeviResult devi(const LinearMixtureSSP& env, const ConfidenceEllipsoid& ellipsoid,
                const ConstraintSet& constraints, const DeviOptions& opts)
{
    if (!(opts.epsilon > 0.0)) throw std::invalid_argument("DEVI needs epsilon > 0");
    if (!(opts.q >= 0.0 && opts.q <= 1.0)) throw std::invalid_argument("DEVI needs q in [0,1]");

    const std::size_t S = env.num_states();
    const std::size_t A = env.num_actions();
    const StateId g = env.goal();

    DeviResult result;
    result.Q = QTable(S, A, 0.0);
    result.V.assign(S, 0.0);

    std::optional<EllipsoidPolytopeProgram> program;
    if (opts.mode == SolverMode::exact) {
        program.emplace(ellipsoid, constraints);
        result.feasibility = program->feasibility().status;
        if (!program->feasible()) {
            result.feasible = false;
            return result;
        }
    }
    result.feasible = true;

    const std::size_t cap = devi_iteration_cap(opts);
    ValueTable previous(S, 0.0);
    QTable next(S, A, 0.0);
    for (std::size_t i = 0; i < cap; ++i) {
        for (StateId s = 0; s < S; ++s) {
            if (s == g) continue;
            for (ActionId a = 0; a < A; ++a) {
                const Vector phi = env.feature_expectation(previous, s, a);
                const double inner = program ? std::max(0.0, program->minimize(phi))
                                             : truncate_fast(ellipsoid, phi, opts.v_max);
                next(s, a) = env.cost(s, a) + (1.0 - opts.q) * inner;
            }
        }
        ValueTable values = next.state_values();
        const double change = sup_norm_distance(values, previous);
        result.sup_norm_changes.push_back(change);
        result.iterations = i + 1;
        result.Q = next;
        result.V = values;
        if (change < opts.epsilon) {
            result.converged = true;
            break;
        }
        previous = std::move(values);
    }
    return result;
}

}  // namespace linssp
