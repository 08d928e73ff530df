#pragma once

#include <cstddef>
#include <vector>

#include "linssp/types.hpp"

namespace linssp {

/// Updates between full refactorizations of a regression level.
inline constexpr std::size_t kRefreshPeriod = 512;

/**
 * Weighted ridge regression for one moment level:
 *   Sigma = lambda I + sum_i w_i^{-2} phi_i phi_i^T,  b = sum_i w_i^{-2} phi_i y_i,
 *   theta = Sigma^{-1} b.
 * Sigma^{-1} and log det Sigma are tracked through rank-one updates and re-anchored
 * by a Cholesky factorization every kRefreshPeriod updates.
 */
class RegressionLevel {
public:
    RegressionLevel(int level, std::size_t dim, double lambda);

    /// Absorbs one observation with regression weight `weight` (sigma-bar, > 0).
    void update(const Vector& phi, double weight, double response);

    int level() const { return level_; }
    std::size_t dim() const { return static_cast<std::size_t>(b_.size()); }
    double lambda() const { return lambda_; }
    std::size_t num_updates() const { return num_updates_; }

    const Matrix& sigma() const { return sigma_; }
    const Matrix& sigma_inv() const { return sigma_inv_; }
    const Vector& b() const { return b_; }
    const Vector& theta() const { return theta_; }
    double log_det() const { return log_det_; }

    /// Recomputes inverse, log-determinant, and estimate from a fresh factorization.
    void refactorize();

private:
    int level_;
    double lambda_;
    Matrix sigma_;
    Matrix sigma_inv_;
    Vector b_;
    Vector theta_;
    double log_det_;
    std::size_t num_updates_ = 0;
    std::size_t since_refresh_ = 0;
};

/// Frozen copy of one level at the start of an interval.
struct LevelSnapshot {
    Matrix sigma;
    Matrix sigma_inv;
    Vector theta;
    double log_det = 0.0;
};

/// Copies of every level taken when an interval starts (step t_j).
struct IntervalSnapshot {
    std::size_t t_j = 0;
    std::vector<LevelSnapshot> levels;

    static IntervalSnapshot take(std::size_t t_j, const std::vector<RegressionLevel>& live);
};

LevelSnapshot snapshot_of(const RegressionLevel& level);

/// ||phi||_{Sigma^{-1}} = sqrt(phi^T Sigma^{-1} phi).
double ellipsoid_norm(const Matrix& sigma_inv, const Vector& phi);
inline double ellipsoid_norm(const RegressionLevel& level, const Vector& phi)
{
    return ellipsoid_norm(level.sigma_inv(), phi);
}
inline double ellipsoid_norm(const LevelSnapshot& snap, const Vector& phi)
{
    return ellipsoid_norm(snap.sigma_inv, phi);
}

/**
 * Confidence radius
 *   12 sqrt(d log(1 + t^2/(d lambda)) log(C (log(t/d) + 2) t^4 / delta))
 *   + 30 sqrt(d) log(C (log(t/d) + 2) t^4 / delta) + 1
 * with C = `constant` (128 by default) and log(t/d) clamped below at 0.
 */
double confidence_radius(std::size_t t, std::size_t d, double lambda, double delta, double constant = 128.0);

/// True when log det(live) - log det(snapshot) >= log 2.
bool det_doubled(const RegressionLevel& live, const LevelSnapshot& snapshot);

/// {theta : ||shape^{1/2} (theta - center)||_2 <= radius}.
struct ConfidenceEllipsoid {
    Vector center;
    Matrix shape;
    Matrix shape_inv;
    double radius = 0.0;

    ConfidenceEllipsoid() = default;
    ConfidenceEllipsoid(Vector center, Matrix shape, double radius);

    std::size_t dim() const { return static_cast<std::size_t>(center.size()); }
    /// ||shape^{1/2} (theta - center)||_2.
    double distance(const Vector& theta) const;
    bool contains(const Vector& theta, double slack = 0.0) const;
    /// min over the ellipsoid of <theta, phi> = <center, phi> - radius ||phi||_{shape^{-1}}.
    double min_linear(const Vector& phi) const;
};

}  // namespace linssp
