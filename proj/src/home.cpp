#include "linssp/home.hpp"

#include <cmath>
#include <stdexcept>

namespace linssp {

double moment_scale(double B, int k)
{
    return std::pow(B, std::ldexp(1.0, k));
}

double estimate_variance(int level, const Vector& phi_l, const Vector& phi_lp1,
                         const Vector& theta_l, const Vector& theta_lp1, double B)
{
    const double second = truncate(phi_lp1.dot(theta_lp1), {0.0, moment_scale(B, level + 1)});
    const double first = truncate(phi_l.dot(theta_l), {0.0, moment_scale(B, level)});
    return second - first * first;
}

double error_bonus(int level, const Vector& phi_l, const Vector& phi_lp1,
                   const IntervalSnapshot& snapshot, double beta_hat, double B)
{
    const auto l = static_cast<std::size_t>(level);
    if (l + 1 >= snapshot.levels.size()) throw std::invalid_argument("error bonus needs snapshot levels l and l+1");
    const double lower = ellipsoid_norm(snapshot.levels[l], phi_l) / moment_scale(B, level);
    const double upper = ellipsoid_norm(snapshot.levels[l + 1], phi_lp1) / moment_scale(B, level + 1);
    return std::min(1.0, 2.0 * beta_hat * lower) + std::min(1.0, beta_hat * upper);
}

WeightBundle home_weights(const HomeInputs& in)
{
    const std::size_t L = in.scaled_features.size();
    if (L == 0) throw std::invalid_argument("HOME needs at least one level");
    if (in.live.size() != L) throw std::invalid_argument("HOME needs one live regression per level");
    if (in.snapshot == nullptr || in.snapshot->levels.size() != L)
        throw std::invalid_argument("HOME needs a snapshot with one entry per level");

    WeightBundle out;
    out.levels.resize(L);
    const double alpha_sq = in.alpha * in.alpha;
    const double gamma_sq = in.gamma * in.gamma;

    for (std::size_t l = 0; l < L; ++l) {
        LevelWeight& w = out.levels[l];
        const Vector& phi = in.scaled_features[l];
        if (l + 1 < L) {
            const Vector& phi_next = in.scaled_features[l + 1];
            w.has_variance = true;
            w.var_est = estimate_variance(static_cast<int>(l), phi, phi_next, in.live[l].theta(),
                                          in.live[l + 1].theta(), 1.0);
            w.error_bonus = error_bonus(static_cast<int>(l), phi, phi_next, *in.snapshot, in.beta_hat, 1.0);
            w.variance_arm = w.var_est + w.error_bonus;
        } else {
            w.variance_arm = 1.0;
        }
        w.alpha_arm = alpha_sq;
        w.guard_arm = in.uncertainty_guard ? gamma_sq * ellipsoid_norm(in.live[l], phi) : 0.0;
        w.sigma_bar_sq = std::max({w.variance_arm, w.alpha_arm, w.guard_arm});
    }
    return out;
}

}  // namespace linssp
