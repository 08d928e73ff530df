#include "linssp/env.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace linssp {

Vector LinearMixtureSSP::feature_expectation(std::span<const double> values, StateId s, ActionId a) const
{
    Vector out = Vector::Zero(dim());
    Vector phi(dim());
    for (StateId next = 0; next < num_states(); ++next) {
        if (values[next] == 0.0) continue;
        feature(next, s, a, phi);
        out += values[next] * phi;
    }
    return out;
}

std::string LinearMixtureSSP::action_label(ActionId a) const
{
    return std::to_string(a);
}

std::string LinearMixtureSSP::state_label(StateId s) const
{
    return std::to_string(s);
}

Vector LinearMixtureSSP::feature(StateId next, StateId s, ActionId a) const
{
    Vector phi(dim());
    feature(next, s, a, phi);
    return phi;
}

double LinearMixtureSSP::probability(StateId next, StateId s, ActionId a) const
{
    return feature(next, s, a).dot(theta_star());
}

std::vector<double> LinearMixtureSSP::transition_distribution(StateId s, ActionId a) const
{
    std::vector<double> p(num_states());
    Vector phi(dim());
    double total = 0.0;
    for (StateId next = 0; next < num_states(); ++next) {
        feature(next, s, a, phi);
        p[next] = phi.dot(theta_star());
        if (!std::isfinite(p[next]) || p[next] < -kDistributionTolerance ||
            p[next] > 1.0 + kDistributionTolerance) {
            std::ostringstream msg;
            msg << "P(" << next << "|" << s << "," << a << ") = " << p[next] << " is not a probability";
            throw ModelError(msg.str());
        }
        total += p[next];
    }
    if (std::abs(total - 1.0) > kDistributionTolerance) {
        std::ostringstream msg;
        msg << "transition probabilities at (" << s << "," << a << ") sum to " << total;
        throw ModelError(msg.str());
    }
    return p;
}

double LinearMixtureSSP::min_cost() const
{
    double m = std::numeric_limits<double>::infinity();
    for (StateId s = 0; s < num_states(); ++s) {
        if (s == goal()) continue;
        for (ActionId a = 0; a < num_actions(); ++a) m = std::min(m, cost(s, a));
    }
    return std::isfinite(m) ? std::max(m, 0.0) : 0.0;
}

// ---------------------------------------------------------------------------

SyntheticSSP::SyntheticSSP(std::size_t d, double delta, double Delta)
    : d_(d), delta_(delta), Delta_(Delta)
{
    if (d < 2) throw ModelError("synthetic instance needs d >= 2");
    if (d > 31) throw ModelError("synthetic instance supports d <= 31");
    if (!(Delta >= 0.0) || !(delta > Delta) || !(delta + Delta < 1.0))
        throw ModelError("synthetic instance needs 0 <= Delta < delta and delta + Delta < 1");
    num_actions_ = std::size_t{1} << (d - 1);
    theta_star_ = Vector::Constant(d, Delta / static_cast<double>(d - 1));
    theta_star_(d - 1) = 1.0;
}

Vector SyntheticSSP::action_vector(ActionId a) const
{
    Vector v(d_ - 1);
    for (std::size_t k = 0; k + 1 < d_; ++k) v(k) = ((a >> k) & 1u) ? 1.0 : -1.0;
    return v;
}

double SyntheticSSP::exit_probability(ActionId a) const
{
    return delta_ + action_vector(a).dot(theta_star_.head(d_ - 1));
}

void SyntheticSSP::feature(StateId next, StateId s, ActionId a, Eigen::Ref<Vector> out) const
{
    if (s == kGoal) {
        out.setZero();
        if (next == kGoal) out(d_ - 1) = 1.0;
        return;
    }
    const double sign = next == kInit ? -1.0 : 1.0;
    for (std::size_t k = 0; k + 1 < d_; ++k) out(k) = sign * (((a >> k) & 1u) ? 1.0 : -1.0);
    out(d_ - 1) = next == kInit ? 1.0 - delta_ : delta_;
}

double SyntheticSSP::cost(StateId s, ActionId) const
{
    return s == kGoal ? 0.0 : 1.0;
}

Vector SyntheticSSP::feature_expectation(std::span<const double> values, StateId s, ActionId a) const
{
    Vector out(d_);
    if (s == kGoal) {
        out.setZero();
        out(d_ - 1) = values[kGoal];
        return out;
    }
    const double diff = values[kGoal] - values[kInit];
    for (std::size_t k = 0; k + 1 < d_; ++k) out(k) = (((a >> k) & 1u) ? 1.0 : -1.0) * diff;
    out(d_ - 1) = (1.0 - delta_) * values[kInit] + delta_ * values[kGoal];
    return out;
}

std::string SyntheticSSP::action_label(ActionId a) const
{
    std::string label = "(";
    for (std::size_t k = 0; k + 1 < d_; ++k) {
        label += ((a >> k) & 1u) ? "+1" : "-1";
        if (k + 2 < d_) label += ",";
    }
    return label + ")";
}

std::string SyntheticSSP::state_label(StateId s) const
{
    return s == kGoal ? "g" : "s_init";
}

// ---------------------------------------------------------------------------

ExplicitSSP::ExplicitSSP(std::size_t num_states, std::size_t num_actions, std::size_t d,
                         std::vector<Vector> features, std::vector<double> costs,
                         StateId goal, StateId init, Vector theta_star)
    : num_states_(num_states), num_actions_(num_actions), d_(d),
      features_(std::move(features)), costs_(std::move(costs)),
      goal_(goal), init_(init), theta_star_(std::move(theta_star))
{
    if (num_states_ == 0 || num_actions_ == 0 || d_ == 0)
        throw ModelError("explicit environment needs at least one state, action, and feature");
    if (features_.size() != num_states_ * num_actions_ * num_states_)
        throw ModelError("feature tensor must hold S*A*S vectors");
    for (const auto& f : features_)
        if (static_cast<std::size_t>(f.size()) != d_) throw ModelError("feature vector has wrong dimension");
    if (costs_.size() != num_states_ * num_actions_) throw ModelError("cost table must hold S*A entries");
    if (goal_ >= num_states_ || init_ >= num_states_) throw ModelError("goal/init index out of range");
    if (static_cast<std::size_t>(theta_star_.size()) != d_) throw ModelError("theta_star has wrong dimension");
}

void ExplicitSSP::feature(StateId next, StateId s, ActionId a, Eigen::Ref<Vector> out) const
{
    out = features_[(s * num_actions_ + a) * num_states_ + next];
}

double ExplicitSSP::cost(StateId s, ActionId a) const
{
    return costs_[s * num_actions_ + a];
}

// ---------------------------------------------------------------------------

PerturbedCostSSP::PerturbedCostSSP(EnvPtr base, double rho) : base_(std::move(base)), rho_(rho)
{
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("perturbation rho must be > 0");
}

double PerturbedCostSSP::cost(StateId s, ActionId a) const
{
    return s == base_->goal() ? 0.0 : base_->cost(s, a) + rho_;
}

// ---------------------------------------------------------------------------

StateId sample_transition(const LinearMixtureSSP& env, StateId s, ActionId a, std::mt19937_64& rng)
{
    const auto p = env.transition_distribution(s, a);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    double cum = 0.0;
    StateId last = 0;
    for (StateId next = 0; next < p.size(); ++next) {
        if (p[next] <= 0.0) continue;
        cum += p[next];
        last = next;
        if (u < cum) return next;
    }
    return last;
}

EnvValidation validate_env(const LinearMixtureSSP& env)
{
    EnvValidation report;
    const std::size_t S = env.num_states();
    const std::size_t A = env.num_actions();
    const StateId g = env.goal();

    const double theta_norm = env.theta_star().norm();
    if (theta_norm > 1.0 + 1e-12) {
        std::ostringstream msg;
        msg << "||theta*||_2 = " << theta_norm << " exceeds 1";
        report.warnings.push_back(msg.str());
    }

    double worst_phi_norm = 0.0;
    ValueTable indicator(S, 0.0);
    for (StateId s = 0; s < S; ++s) {
        for (ActionId a = 0; a < A; ++a) {
            const double c = env.cost(s, a);
            if (!(c >= 0.0 && c <= 1.0)) {
                std::ostringstream msg;
                msg << "cost(" << s << "," << a << ") = " << c << " outside [0,1]";
                report.errors.push_back(msg.str());
            }
            try {
                const auto p = env.transition_distribution(s, a);
                if (s == g && std::abs(p[g] - 1.0) > kDistributionTolerance)
                    report.errors.push_back("goal is not absorbing under action " + std::to_string(a));
            } catch (const ModelError& e) {
                report.errors.emplace_back(e.what());
            }
            // ||phi_V|| over V in [0,1] is maximised at an indicator vector.
            Vector positive = Vector::Zero(env.dim());
            Vector negative = Vector::Zero(env.dim());
            Vector phi(env.dim());
            for (StateId next = 0; next < S; ++next) {
                env.feature(next, s, a, phi);
                positive += phi.cwiseMax(0.0);
                negative += phi.cwiseMin(0.0);
            }
            worst_phi_norm = std::max(worst_phi_norm, positive.cwiseMax(-negative).norm());
        }
        if (s == g)
            for (ActionId a = 0; a < A; ++a)
                if (env.cost(g, a) != 0.0) report.errors.push_back("goal cost must be 0");
    }
    if (worst_phi_norm > 1.0 + 1e-12) {
        std::ostringstream msg;
        msg << "||phi_V||_2 may reach " << worst_phi_norm << " for V in [0,1] (bound is 1)";
        report.warnings.push_back(msg.str());
    }
    return report;
}

ValueTable bellman_operator(const LinearMixtureSSP& env, const ValueTable& values)
{
    ValueTable out(env.num_states(), 0.0);
    for (StateId s = 0; s < env.num_states(); ++s) {
        if (s == env.goal()) continue;
        double best = std::numeric_limits<double>::infinity();
        for (ActionId a = 0; a < env.num_actions(); ++a) {
            const double q = env.cost(s, a) + env.feature_expectation(values, s, a).dot(env.theta_star());
            best = std::min(best, q);
        }
        out[s] = best;
    }
    return out;
}

OptimalSolution exact_optimal_value(const LinearMixtureSSP& env, const ValueIterationOptions& opts)
{
    const std::size_t S = env.num_states();
    const std::size_t A = env.num_actions();
    const StateId g = env.goal();

    for (StateId s = 0; s < S; ++s)
        for (ActionId a = 0; a < A; ++a) env.transition_distribution(s, a);

    OptimalSolution sol;
    ValueTable v(S, 0.0);
    bool converged = false;
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        ValueTable next = bellman_operator(env, v);
        const double change = sup_norm_distance(next, v);
        v = std::move(next);
        sol.iterations = it + 1;
        if (change < opts.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("value iteration did not converge; the instance may have no proper policy");

    // Greedy policy, then exact policy evaluation on the non-goal states.
    sol.policy.assign(S, 0);
    for (StateId s = 0; s < S; ++s) {
        if (s == g) continue;
        double best = std::numeric_limits<double>::infinity();
        for (ActionId a = 0; a < A; ++a) {
            const double q = env.cost(s, a) + env.feature_expectation(v, s, a).dot(env.theta_star());
            if (q < best) {
                best = q;
                sol.policy[s] = a;
            }
        }
    }

    Matrix system = Matrix::Identity(S, S);
    Vector costs = Vector::Zero(S);
    Vector ones = Vector::Zero(S);
    for (StateId s = 0; s < S; ++s) {
        if (s == g) continue;
        const auto p = env.transition_distribution(s, sol.policy[s]);
        for (StateId next = 0; next < S; ++next)
            if (next != g) system(s, next) -= p[next];
        costs(s) = env.cost(s, sol.policy[s]);
        ones(s) = 1.0;
    }
    Eigen::FullPivLU<Matrix> lu(system);
    if (!lu.isInvertible()) throw ModelError("greedy policy is improper");
    const Vector values = lu.solve(costs);
    const Vector hitting = lu.solve(ones);
    if (!values.allFinite() || !hitting.allFinite() || hitting.minCoeff() < -1e-9)
        throw ModelError("greedy policy is improper");

    sol.values.assign(values.data(), values.data() + S);
    sol.hitting_times.assign(hitting.data(), hitting.data() + S);
    sol.values[g] = 0.0;
    sol.hitting_times[g] = 0.0;
    sol.B_star = *std::max_element(sol.values.begin(), sol.values.end());
    sol.T_star = *std::max_element(sol.hitting_times.begin(), sol.hitting_times.end());
    sol.bellman_residual = sup_norm_distance(bellman_operator(env, sol.values), sol.values);
    return sol;
}

}  // namespace linssp
