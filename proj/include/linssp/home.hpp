#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "linssp/types.hpp"
#include "linssp/wls.hpp"

namespace linssp {

struct TruncationBounds {
    double lo;
    double hi;
};

/// Clamps x to [lo, hi].
inline double truncate(double x, TruncationBounds bounds)
{
    return x < bounds.lo ? bounds.lo : (x > bounds.hi ? bounds.hi : x);
}

/// B^{2^k}; overflows to +inf for large k, so callers working at many levels
/// should pass features already divided by this scale and B = 1.
double moment_scale(double B, int k);

/**
 * Variance estimate of V^{2^l} at the current state-action pair:
 *   [<phi_{l+1}, theta_{l+1}>]_{[0, B^{2^{l+1}}]} - [<phi_l, theta_l>]_{[0, B^{2^l}]}^2.
 */
double estimate_variance(int level, const Vector& phi_l, const Vector& phi_lp1,
                         const Vector& theta_l, const Vector& theta_lp1, double B);

/**
 * Error bonus for the variance estimate at level l, using the interval snapshot:
 *   min{1, 2 beta ||phi_l / B^{2^l}||_{Sigma_hat_l^{-1}}}
 *   + min{1, beta ||phi_{l+1} / B^{2^{l+1}}||_{Sigma_hat_{l+1}^{-1}}}.
 */
double error_bonus(int level, const Vector& phi_l, const Vector& phi_lp1,
                   const IntervalSnapshot& snapshot, double beta_hat, double B);

/// Per-level output of the weight computation, in units scaled by B^{2^{l+1}}.
struct LevelWeight {
    double sigma_bar_sq = 0.0;  // sigma_bar^2 / B^{2^{l+1}}
    double variance_arm = 0.0;  // var_est + E below the top level, 1 at the top
    double alpha_arm = 0.0;     // alpha_t^2
    double guard_arm = 0.0;     // gamma^2 ||phi_l / B^{2^l}||_{Sigma_tilde_l^{-1}}
    bool has_variance = false;  // false at the top level
    double var_est = 0.0;       // variance estimate / B^{2^{l+1}}
    double error_bonus = 0.0;   // E_{t,l}
};

struct WeightBundle {
    std::vector<LevelWeight> levels;

    /// Unscaled sigma_bar^2 for level l.
    double sigma_bar_sq(std::size_t l, double B) const
    {
        return levels[l].sigma_bar_sq * moment_scale(B, static_cast<int>(l) + 1);
    }
};

struct HomeInputs {
    /// phi_{V^{2^l}}(s_t,a_t) / B^{2^l} for l = 0..L-1.
    std::span<const Vector> scaled_features;
    /// Live regression levels (their theta() is the current estimate).
    std::span<const RegressionLevel> live;
    const IntervalSnapshot* snapshot = nullptr;
    double beta_hat = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    /// Drop the gamma-term from the max (the variance-only ablation).
    bool uncertainty_guard = true;
};

/**
 * Regression weights from high-order moment estimates. For l <= L-2,
 *   sigma_bar^2 = B^{2^{l+1}} max{var_est / B^{2^{l+1}} + E, alpha^2, gamma^2 ||phi_l/B^{2^l}||_{Sigma_tilde^{-1}}},
 * and at the top level the variance arm is replaced by 1. The error bonus reads
 * the snapshot matrices while the gamma-guard reads the live ones.
 */
WeightBundle home_weights(const HomeInputs& in);

}  // namespace linssp
