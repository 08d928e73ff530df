#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "linssp/env.hpp"
#include "linssp/types.hpp"
#include "linssp/wls.hpp"

namespace linssp {

/**
 * Parameters theta under which every <phi(.|s,a), theta> is a probability
 * distribution and the goal is absorbing:
 *   equality rows   A theta = b,
 *   inequality rows G theta >= h.
 * Duplicate rows are removed at construction.
 */
struct ConstraintSet {
    Matrix equality;
    Vector equality_rhs;
    Matrix inequality;
    Vector inequality_rhs;
    /// Set when a row reads 0 = 1 (or 0 >= positive): the set is empty.
    bool trivially_empty = false;

    static ConstraintSet from_env(const LinearMixtureSSP& env);

    std::size_t dim() const { return static_cast<std::size_t>(equality.cols()); }
    bool contains(const Vector& theta, double tol = 1e-9) const;
};

enum class FeasibilityStatus { feasible, infeasible, stalled };

const char* to_string(FeasibilityStatus status);

struct FeasibilityResult {
    FeasibilityStatus status = FeasibilityStatus::stalled;
    /// A point of C intersect B when feasible (the ellipsoid center if it qualifies).
    std::optional<Vector> witness;
    /// Largest common slack found by phase I (negative when infeasible).
    double margin = 0.0;
};

/// Thrown when an exact minimization is requested over an empty or undecided set.
class InfeasibleProgram : public ModelError {
public:
    using ModelError::ModelError;
};

/**
 * min <theta, phi> over ellipsoid intersect polytope, solved by a log-barrier
 * method in the null space of the equality rows. Construction runs phase I once
 * (feasibility); minimize() can then be called for many objectives.
 */
class EllipsoidPolytopeProgram {
public:
    EllipsoidPolytopeProgram(const ConfidenceEllipsoid& ellipsoid, const ConstraintSet& constraints);

    const FeasibilityResult& feasibility() const { return feasibility_; }
    bool feasible() const { return feasibility_.status == FeasibilityStatus::feasible; }

    /// Optimal value to within 1e-9 absolute (duality-gap bound).
    double minimize(const Vector& phi) const;

private:
    double solve_direction(const Vector& unit_reduced) const;

    Vector theta0_;   // particular solution of the equality rows
    Matrix null_;     // orthonormal null-space basis (d x k)
    Matrix quad_;     // ellipsoid in z: 1 - (z^T P z + 2 p^T z + p0) >= 0
    Vector lin_quad_;
    double const_quad_ = 0.0;
    Matrix rows_;     // reduced inequalities rows_ z >= rhs_
    Vector rhs_;
    Vector start_;    // strictly feasible reduced point
    std::optional<Vector> point_;  // set when the feasible set is a single point
    FeasibilityResult feasibility_;

    mutable std::mutex cache_mutex_;
    mutable std::map<std::vector<long long>, double> cache_;
};

/// feasibility check of C intersect B.
FeasibilityResult feasibility_check(const ConfidenceEllipsoid& ellipsoid, const ConstraintSet& constraints);

enum class SolverMode { exact, fast };

const char* to_string(SolverMode mode);

/**
 * Inner minimization of the optimistic Bellman update.
 * exact: min <theta, phi> over C intersect B.
 * fast:  [<center, phi> - radius ||phi||_{shape^{-1}}] truncated to [0, v_max].
 */
double optimistic_min(const ConfidenceEllipsoid& ellipsoid, const ConstraintSet& constraints,
                      const Vector& phi, SolverMode mode, double v_max);

struct DeviOptions {
    double epsilon = 1e-3;
    double q = 1e-3;
    SolverMode mode = SolverMode::fast;
    /// Truncation ceiling of the fast mode (the known bound B).
    double v_max = 1.0;
    /// 0 selects ceil(log(v_max/epsilon)/q) * 10 (or 10^6 when q = 0).
    std::size_t max_iterations = 0;
};

struct DeviResult {
    QTable Q;
    ValueTable V;
    std::size_t iterations = 0;
    bool converged = false;
    bool feasible = false;
    FeasibilityStatus feasibility = FeasibilityStatus::feasible;
    /// ||V^{(i+1)} - V^{(i)}||_inf for every sweep.
    std::vector<double> sup_norm_changes;

    /// Checks ||V^{(i+1)} - V^{(i)}|| <= factor ||V^{(i)} - V^{(i-1)}|| + slack on every sweep.
    bool contracts(double factor, double slack) const;
};

std::size_t devi_iteration_cap(const DeviOptions& opts);

/**
 * Optimistic value iteration
 *   Q^{(i+1)}(s,a) = c(s,a) + (1-q) min_{theta in C cap B} <theta, phi_{V^{(i)}}(s,a)>,
 *   V^{(i+1)}(s)   = min_a Q^{(i+1)}(s,a),
 * from zero until the sup-norm change drops below epsilon. Returns Q = 0 with
 * feasible = false when C cap B is empty (or cannot be shown non-empty).
 * The goal row is pinned to zero.
 */
DeviResult devi(const LinearMixtureSSP& env, const ConfidenceEllipsoid& ellipsoid,
                const ConstraintSet& constraints, const DeviOptions& opts);

}  // namespace linssp
