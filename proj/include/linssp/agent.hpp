#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linssp/devi.hpp"
#include "linssp/env.hpp"
#include "linssp/home.hpp"
#include "linssp/wls.hpp"

namespace linssp {

enum class AlgorithmKind {
    levis_pp,       // full high-order moment weighting
    unweighted,     // sigma_bar = 1, one level
    variance_only,  // two levels, no gamma-guard in the weights
};

enum class AlphaSchedule { inv_sqrt, inv_square };

const char* to_string(AlgorithmKind kind);
const char* to_string(AlphaSchedule schedule);
AlgorithmKind parse_algorithm(const std::string& name);
AlphaSchedule parse_alpha_schedule(const std::string& name);
SolverMode parse_solver_mode(const std::string& name);

struct AgentConfig {
    double B = 3.0;
    std::optional<double> c_min;
    std::optional<double> T_star;
    std::optional<double> lambda;  // default 1/B^2
    std::optional<double> gamma;   // default d^{-1/4}
    AlphaSchedule alpha_schedule = AlphaSchedule::inv_sqrt;
    std::optional<int> levels;     // default max(1, ceil(log2(5B/c_min)))
    double fail_prob = 0.01;
    double beta_constant = 128.0;
    SolverMode devi_mode = SolverMode::fast;
    AlgorithmKind algorithm = AlgorithmKind::levis_pp;
};

/// Concrete parameter values after applying defaults.
struct ResolvedParams {
    AlgorithmKind algorithm = AlgorithmKind::levis_pp;
    double B = 0.0;
    double c_min = 0.0;
    double lambda = 0.0;
    double gamma = 0.0;
    int levels = 1;
    AlphaSchedule alpha_schedule = AlphaSchedule::inv_sqrt;
    double fail_prob = 0.0;
    double beta_constant = 128.0;
    SolverMode devi_mode = SolverMode::fast;
};

/// max(1, ceil(log2(5 B / c_min))).
int default_levels(double B, double c_min);
double alpha_at(AlphaSchedule schedule, std::size_t t);

/// Applies defaults and checks B > 0, delta in (0,1), lambda > 0, L >= 1.
ResolvedParams resolve(const AgentConfig& config, std::size_t dim);

/// Outcome of the interval-end test at step t.
struct Trigger {
    bool fired = false;
    bool time_doubled = false;
    int level = -1;  // first level whose determinant doubled, or -1
};

/// Fires when some level's log det grew by log 2 since the snapshot, or t >= max(2 t_j, 1).
Trigger update_trigger(std::size_t t, std::size_t t_j, const std::vector<RegressionLevel>& live,
                       const IntervalSnapshot& snapshot);

struct UpdateRecord {
    std::size_t t = 0;
    std::size_t j = 0;
    Trigger trigger;
    double beta = 0.0;
    double epsilon = 0.0;
    bool covered = false;             // theta* in every level's ellipsoid
    std::optional<bool> optimistic;   // set when a reference V* is known and coverage held
    double v_init = 0.0;
    std::size_t devi_iterations = 0;
    FeasibilityStatus feasibility = FeasibilityStatus::feasible;
    std::optional<bool> contraction;  // exact mode only
};

struct AgentStats {
    std::size_t steps = 0;
    std::size_t devi_calls = 0;
    std::size_t coverage_violations = 0;
    std::size_t optimism_checks = 0;
    std::size_t optimism_violations = 0;
    std::size_t variance_checks = 0;
    std::size_t variance_violations = 0;
    std::size_t contraction_violations = 0;
    std::vector<UpdateRecord> updates;
};

/// Per-step regression data handed to an observer before the levels are updated.
struct StepTrace {
    std::size_t t = 0;
    StateId state = 0;
    ActionId action = 0;
    StateId next = 0;
    std::span<const Vector> scaled_features;  // phi_{t,l} / B^{2^l}
    std::span<const double> responses;        // (V_j(s_{t+1}) / B)^{2^l}
    std::span<const double> weights;          // sigma_bar_{t,l} / B^{2^l}
    const WeightBundle* home = nullptr;       // null for the unweighted variant
};

using StepObserver = std::function<void(const StepTrace&)>;

/// Online learner driven by the episode runner.
class Learner {
public:
    virtual ~Learner() = default;
    virtual ActionId act(StateId s) const = 0;
    virtual void observe(StateId s, ActionId a, double cost, StateId next) = 0;
    virtual void end_episode() = 0;
    virtual const AgentStats& stats() const = 0;
};

/// Value tolerance for the contraction check in exact mode (solver accuracy).
inline constexpr double kContractionSlack = 1e-8;

/**
 * Optimistic online learner for linear mixture SSPs with variance-aware weighted
 * regression at L moment levels and interval-based replanning.
 *
 * Regression inputs are kept in units scaled by B^{2^l}: level l regresses
 * (min(V_j, B)/B)^{2^l} on phi/B^{2^l} with weight sigma_bar/B^{2^l}. Every
 * covariance, response vector, and estimate equals its unscaled counterpart.
 */
class LevisAgent final : public Learner {
public:
    LevisAgent(EnvPtr env, const AgentConfig& config);

    ActionId act(StateId s) const override;
    void observe(StateId s, ActionId a, double cost, StateId next) override;
    void end_episode() override;
    const AgentStats& stats() const override { return stats_; }

    /// Enables the optimism diagnostic against known optimal values.
    void set_reference_values(ValueTable v_star) { reference_ = std::move(v_star); }
    void set_observer(StepObserver observer) { observer_ = std::move(observer); }

    const ResolvedParams& params() const { return params_; }
    const std::vector<RegressionLevel>& levels() const { return levels_; }
    const IntervalSnapshot& snapshot() const { return snapshot_; }
    const QTable& q_table() const { return Q_; }
    const ValueTable& values() const { return V_; }
    const std::optional<ConfidenceEllipsoid>& ellipsoid() const { return ellipsoid_; }
    std::size_t next_step() const { return t_; }
    std::size_t interval_index() const { return j_; }
    std::size_t interval_start() const { return snapshot_.t_j; }

private:
    void maybe_update(std::size_t t);

    EnvPtr env_;
    ResolvedParams params_;
    std::optional<ConstraintSet> constraints_;
    std::vector<RegressionLevel> levels_;
    IntervalSnapshot snapshot_;
    std::optional<ConfidenceEllipsoid> ellipsoid_;
    QTable Q_;
    ValueTable V_;
    std::size_t t_ = 1;
    std::size_t j_ = 0;
    AgentStats stats_;
    std::optional<ValueTable> reference_;
    StepObserver observer_;
};

struct PerturbationConfig {
    double rho = 0.0;
    double T_star = 0.0;

    /// B_rho = B + T* rho.
    double bound(double B) const { return B + T_star * rho; }
    /// rho = 1 / (T* K).
    static PerturbationConfig for_horizon(double T_star, std::size_t episodes);
};

/**
 * Runs an inner LevisAgent on costs c + rho with bound B + T* rho and cost floor
 * rho. The inner level count defaults to max(1, ceil(log2(5B/rho))).
 */
class PerturbedAgent final : public Learner {
public:
    PerturbedAgent(EnvPtr env, const AgentConfig& config, const PerturbationConfig& perturbation);

    ActionId act(StateId s) const override { return inner_->act(s); }
    void observe(StateId s, ActionId a, double cost, StateId next) override;
    void end_episode() override { inner_->end_episode(); }
    const AgentStats& stats() const override { return inner_->stats(); }

    const PerturbationConfig& perturbation() const { return perturbation_; }
    const LinearMixtureSSP& perturbed_env() const { return *view_; }
    LevisAgent& inner() { return *inner_; }
    const LevisAgent& inner() const { return *inner_; }

private:
    PerturbationConfig perturbation_;
    std::shared_ptr<const PerturbedCostSSP> view_;
    std::unique_ptr<LevisAgent> inner_;
};

}  // namespace linssp
