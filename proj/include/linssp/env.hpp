#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "linssp/types.hpp"

namespace linssp {

/// Tolerance used when validating transition distributions.
inline constexpr double kDistributionTolerance = 1e-9;

/**
 * Finite-state stochastic shortest path whose transition kernel is linear in a
 * hidden parameter: P(s'|s,a) = <phi(s'|s,a), theta*>.
 *
 * Instances are immutable after construction and may be shared across threads.
 */
class LinearMixtureSSP {
public:
    virtual ~LinearMixtureSSP() = default;

    virtual std::size_t num_states() const = 0;
    virtual std::size_t num_actions() const = 0;
    virtual std::size_t dim() const = 0;
    virtual StateId goal() const = 0;
    virtual StateId initial_state() const = 0;

    /// Writes phi(next|s,a) into `out` (size dim()).
    virtual void feature(StateId next, StateId s, ActionId a, Eigen::Ref<Vector> out) const = 0;
    virtual double cost(StateId s, ActionId a) const = 0;
    virtual const Vector& theta_star() const = 0;

    /// phi_V(s,a) = sum_{s'} phi(s'|s,a) V(s').
    virtual Vector feature_expectation(std::span<const double> values, StateId s, ActionId a) const;

    virtual std::string action_label(ActionId a) const;
    virtual std::string state_label(StateId s) const;
    virtual std::string kind() const = 0;

    Vector feature(StateId next, StateId s, ActionId a) const;
    double probability(StateId next, StateId s, ActionId a) const;

    /// Next-state distribution under theta*; throws ModelError if it is not a
    /// distribution within kDistributionTolerance.
    std::vector<double> transition_distribution(StateId s, ActionId a) const;

    /// Smallest cost over non-goal state-action pairs (0 if costs can vanish).
    double min_cost() const;
};

using EnvPtr = std::shared_ptr<const LinearMixtureSSP>;

/**
 * Two-state instance with actions {-1,+1}^{d-1}:
 *   phi(s_init|s_init,a) = [-a, 1-delta], phi(g|s_init,a) = [a, delta],
 *   phi(s_init|g,a) = 0, phi(g|g,a) = e_d,
 *   theta* = [Delta/(d-1), ..., Delta/(d-1), 1].
 * Costs are 1 at s_init and 0 at the goal. Actions are decoded from their index
 * on demand: coordinate k is +1 when bit k is set, -1 otherwise.
 */
class SyntheticSSP final : public LinearMixtureSSP {
public:
    static constexpr StateId kInit = 0;
    static constexpr StateId kGoal = 1;

    SyntheticSSP(std::size_t d, double delta, double Delta);

    std::size_t num_states() const override { return 2; }
    std::size_t num_actions() const override { return num_actions_; }
    std::size_t dim() const override { return d_; }
    StateId goal() const override { return kGoal; }
    StateId initial_state() const override { return kInit; }

    void feature(StateId next, StateId s, ActionId a, Eigen::Ref<Vector> out) const override;
    double cost(StateId s, ActionId a) const override;
    const Vector& theta_star() const override { return theta_star_; }
    Vector feature_expectation(std::span<const double> values, StateId s, ActionId a) const override;

    std::string action_label(ActionId a) const override;
    std::string state_label(StateId s) const override;
    std::string kind() const override { return "synthetic"; }

    /// The action as a {-1,+1} vector of length d-1.
    Vector action_vector(ActionId a) const;
    /// P(g|s_init,a) = delta + <a, theta*_{1:d-1}>.
    double exit_probability(ActionId a) const;

    double delta() const { return delta_; }
    double Delta() const { return Delta_; }

private:
    std::size_t d_;
    double delta_;
    double Delta_;
    std::size_t num_actions_;
    Vector theta_star_;
};

/**
 * Environment with an explicitly enumerated feature tensor.
 * features[(s * A + a) * S + next] is phi(next|s,a).
 */
class ExplicitSSP final : public LinearMixtureSSP {
public:
    ExplicitSSP(std::size_t num_states, std::size_t num_actions, std::size_t d,
                std::vector<Vector> features, std::vector<double> costs,
                StateId goal, StateId init, Vector theta_star);

    std::size_t num_states() const override { return num_states_; }
    std::size_t num_actions() const override { return num_actions_; }
    std::size_t dim() const override { return d_; }
    StateId goal() const override { return goal_; }
    StateId initial_state() const override { return init_; }

    void feature(StateId next, StateId s, ActionId a, Eigen::Ref<Vector> out) const override;
    double cost(StateId s, ActionId a) const override;
    const Vector& theta_star() const override { return theta_star_; }
    std::string kind() const override { return "explicit"; }

private:
    std::size_t num_states_;
    std::size_t num_actions_;
    std::size_t d_;
    std::vector<Vector> features_;
    std::vector<double> costs_;
    StateId goal_;
    StateId init_;
    Vector theta_star_;
};

/**
 * Cost-shifted view c^rho(s,a) = c(s,a) + rho away from the goal. Features and
 * theta* are forwarded unchanged.
 */
class PerturbedCostSSP final : public LinearMixtureSSP {
public:
    PerturbedCostSSP(EnvPtr base, double rho);

    std::size_t num_states() const override { return base_->num_states(); }
    std::size_t num_actions() const override { return base_->num_actions(); }
    std::size_t dim() const override { return base_->dim(); }
    StateId goal() const override { return base_->goal(); }
    StateId initial_state() const override { return base_->initial_state(); }

    void feature(StateId next, StateId s, ActionId a, Eigen::Ref<Vector> out) const override {
        base_->feature(next, s, a, out);
    }
    double cost(StateId s, ActionId a) const override;
    const Vector& theta_star() const override { return base_->theta_star(); }
    Vector feature_expectation(std::span<const double> values, StateId s, ActionId a) const override {
        return base_->feature_expectation(values, s, a);
    }
    std::string action_label(ActionId a) const override { return base_->action_label(a); }
    std::string state_label(StateId s) const override { return base_->state_label(s); }
    std::string kind() const override { return "perturbed-" + base_->kind(); }

    double rho() const { return rho_; }
    const LinearMixtureSSP& base() const { return *base_; }

private:
    EnvPtr base_;
    double rho_;
};

/// Draws s' ~ <phi(.|s,a), theta*>. Throws ModelError on a malformed distribution.
StateId sample_transition(const LinearMixtureSSP& env, StateId s, ActionId a, std::mt19937_64& rng);

/// Result of checking the structural invariants of an environment.
struct EnvValidation {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

/// Checks distribution validity, goal absorption, cost range, and the norm
/// bounds on theta* and phi_V (the latter two are reported as warnings).
EnvValidation validate_env(const LinearMixtureSSP& env);

struct OptimalSolution {
    ValueTable values;                 // V*
    std::vector<ActionId> policy;      // greedy, lowest-index tie-break
    std::vector<double> hitting_times; // T^{pi*}(s)
    double B_star = 0.0;
    double T_star = 0.0;
    std::size_t iterations = 0;
    double bellman_residual = 0.0;
};

struct ValueIterationOptions {
    double tolerance = 1e-10;
    std::size_t max_iterations = 1'000'000;
};

/**
 * V* by value iteration on the true model, followed by an exact evaluation of
 * the greedy policy (linear solve on its transition matrix) for V^{pi*} and the
 * hitting times. Throws ConvergenceError if value iteration does not settle and
 * ModelError if the greedy policy is improper.
 */
OptimalSolution exact_optimal_value(const LinearMixtureSSP& env, const ValueIterationOptions& opts = {});

/// (LV)(s) = min_a { c(s,a) + sum_{s'} P(s'|s,a) V(s') }, with (LV)(g) = 0.
ValueTable bellman_operator(const LinearMixtureSSP& env, const ValueTable& values);

}  // namespace linssp
