#include "linssp/agent.hpp"

#include <cmath>
#include <numbers>

namespace linssp {

const char* to_string(AlgorithmKind kind)
{
    switch (kind) {
        case AlgorithmKind::levis_pp:
            return "levis_pp";
        case AlgorithmKind::unweighted:
            return "unweighted";
        case AlgorithmKind::variance_only:
            return "variance_only";
    }
    return "unknown";
}

const char* to_string(AlphaSchedule schedule)
{
    return schedule == AlphaSchedule::inv_sqrt ? "inv_sqrt" : "inv_square";
}

AlgorithmKind parse_algorithm(const std::string& name)
{
    if (name == "levis_pp") return AlgorithmKind::levis_pp;
    if (name == "unweighted") return AlgorithmKind::unweighted;
    if (name == "variance_only") return AlgorithmKind::variance_only;
    throw ConfigError("unknown algorithm '" + name + "' (expected levis_pp, unweighted, variance_only)");
}

AlphaSchedule parse_alpha_schedule(const std::string& name)
{
    if (name == "inv_sqrt") return AlphaSchedule::inv_sqrt;
    if (name == "inv_square") return AlphaSchedule::inv_square;
    throw ConfigError("unknown alpha schedule '" + name + "' (expected inv_sqrt, inv_square)");
}

SolverMode parse_solver_mode(const std::string& name)
{
    if (name == "fast") return SolverMode::fast;
    if (name == "exact") return SolverMode::exact;
    throw ConfigError("unknown DEVI mode '" + name + "' (expected fast, exact)");
}

int default_levels(double B, double c_min)
{
    if (!(c_min > 0.0)) throw ConfigError("deriving the level count needs c_min > 0");
    return std::max(1, static_cast<int>(std::ceil(std::log2(5.0 * B / c_min))));
}

double alpha_at(AlphaSchedule schedule, std::size_t t)
{
    const double tt = static_cast<double>(std::max<std::size_t>(t, 1));
    return schedule == AlphaSchedule::inv_sqrt ? 1.0 / std::sqrt(tt) : 1.0 / (tt * tt);
}

ResolvedParams resolve(const AgentConfig& config, std::size_t dim)
{
    ResolvedParams p;
    p.algorithm = config.algorithm;
    p.B = config.B;
    if (!(p.B > 0.0) || !std::isfinite(p.B)) throw ConfigError("B must be > 0");
    p.fail_prob = config.fail_prob;
    if (!(p.fail_prob > 0.0 && p.fail_prob < 1.0)) throw ConfigError("fail_prob must lie in (0,1)");
    p.lambda = config.lambda.value_or(1.0 / (p.B * p.B));
    if (!(p.lambda > 0.0)) throw ConfigError("lambda must be > 0");
    p.gamma = config.gamma.value_or(std::pow(static_cast<double>(dim), -0.25));
    if (!(p.gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
    p.alpha_schedule = config.alpha_schedule;
    p.beta_constant = config.beta_constant;
    if (!(p.beta_constant > 0.0)) throw ConfigError("beta_constant must be > 0");
    p.devi_mode = config.devi_mode;
    p.c_min = config.c_min.value_or(0.0);

    switch (config.algorithm) {
        case AlgorithmKind::unweighted:
            p.levels = 1;
            break;
        case AlgorithmKind::variance_only:
            p.levels = 2;
            break;
        case AlgorithmKind::levis_pp:
            if (config.levels)
                p.levels = *config.levels;
            else if (config.c_min)
                p.levels = default_levels(p.B, *config.c_min);
            else
                throw ConfigError("levels must be given when c_min is unknown");
            break;
    }
    if (p.levels < 1) throw ConfigError("level count must be >= 1");
    return p;
}

Trigger update_trigger(std::size_t t, std::size_t t_j, const std::vector<RegressionLevel>& live,
                       const IntervalSnapshot& snapshot)
{
    Trigger trig;
    trig.time_doubled = t >= std::max<std::size_t>(2 * t_j, 1);
    for (std::size_t l = 0; l < live.size(); ++l) {
        if (det_doubled(live[l], snapshot.levels[l])) {
            trig.level = static_cast<int>(l);
            break;
        }
    }
    trig.fired = trig.time_doubled || trig.level >= 0;
    return trig;
}

// ---------------------------------------------------------------------------

LevisAgent::LevisAgent(EnvPtr env, const AgentConfig& config)
    : env_(std::move(env)), params_(resolve(config, env_->dim()))
{
    const std::size_t S = env_->num_states();
    const std::size_t A = env_->num_actions();
    if (params_.devi_mode == SolverMode::exact) constraints_ = ConstraintSet::from_env(*env_);

    levels_.reserve(static_cast<std::size_t>(params_.levels));
    for (int l = 0; l < params_.levels; ++l) levels_.emplace_back(l, env_->dim(), params_.lambda);
    snapshot_ = IntervalSnapshot::take(0, levels_);

    Q_ = QTable(S, A, 1.0);
    V_.assign(S, 1.0);
    for (ActionId a = 0; a < A; ++a) Q_(env_->goal(), a) = 0.0;
    V_[env_->goal()] = 0.0;
}

ActionId LevisAgent::act(StateId s) const
{
    return Q_.argmin(s);
}

void LevisAgent::observe(StateId s, ActionId a, double, StateId next)
{
    const std::size_t t = t_;
    const auto L = static_cast<std::size_t>(params_.levels);
    const std::size_t S = env_->num_states();
    const double B = params_.B;

    // Moments of min(V_j, B)/B, level by level.
    std::vector<double> power(S);
    for (StateId x = 0; x < S; ++x) power[x] = std::clamp(V_[x] / B, 0.0, 1.0);
    std::vector<Vector> features;
    std::vector<double> responses;
    features.reserve(L);
    responses.reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
        if (l > 0)
            for (double& u : power) u *= u;
        features.push_back(env_->feature_expectation(power, s, a));
        responses.push_back(power[next]);
    }

    const double beta = confidence_radius(t, env_->dim(), params_.lambda, params_.fail_prob, params_.beta_constant);
    std::vector<double> weights(L);
    std::optional<WeightBundle> bundle;
    if (params_.algorithm == AlgorithmKind::unweighted) {
        // sigma_bar = 1 in unscaled units.
        for (std::size_t l = 0; l < L; ++l) weights[l] = 1.0 / moment_scale(B, static_cast<int>(l));
    } else {
        HomeInputs in;
        in.scaled_features = features;
        in.live = levels_;
        in.snapshot = &snapshot_;
        in.beta_hat = beta;
        in.alpha = alpha_at(params_.alpha_schedule, t);
        in.gamma = params_.gamma;
        in.uncertainty_guard = params_.algorithm != AlgorithmKind::variance_only;
        bundle = home_weights(in);
        for (std::size_t l = 0; l < L; ++l) weights[l] = std::sqrt(bundle->levels[l].sigma_bar_sq);

        if (L >= 2) {
            const Vector& theta_star = env_->theta_star();
            bool held = true;
            for (std::size_t l = 0; l + 1 < L; ++l) {
                const double first = features[l].dot(theta_star);
                const double truth = features[l + 1].dot(theta_star) - first * first;
                const auto& w = bundle->levels[l];
                if (std::abs(w.var_est - truth) > w.error_bonus + 1e-12) held = false;
            }
            ++stats_.variance_checks;
            if (!held) ++stats_.variance_violations;
        }
    }

    if (observer_) {
        StepTrace trace;
        trace.t = t;
        trace.state = s;
        trace.action = a;
        trace.next = next;
        trace.scaled_features = features;
        trace.responses = responses;
        trace.weights = weights;
        trace.home = bundle ? &*bundle : nullptr;
        observer_(trace);
    }

    for (std::size_t l = 0; l < L; ++l) levels_[l].update(features[l], weights[l], responses[l]);
    ++stats_.steps;
    maybe_update(t);
    ++t_;
}

void LevisAgent::maybe_update(std::size_t t)
{
    const Trigger trig = update_trigger(t, snapshot_.t_j, levels_, snapshot_);
    if (!trig.fired) return;

    ++j_;
    const double epsilon = 1.0 / static_cast<double>(t);
    const double q = epsilon;
    snapshot_ = IntervalSnapshot::take(t, levels_);
    const double beta = confidence_radius(t, env_->dim(), params_.lambda, params_.fail_prob, params_.beta_constant);
    ellipsoid_.emplace(levels_[0].theta(), levels_[0].sigma(), beta);

    UpdateRecord rec;
    rec.t = t;
    rec.j = j_;
    rec.trigger = trig;
    rec.beta = beta;
    rec.epsilon = epsilon;
    rec.covered = true;
    const Vector& theta_star = env_->theta_star();
    for (const auto& snap : snapshot_.levels) {
        const Vector diff = theta_star - snap.theta;
        if (std::sqrt(std::max(0.0, diff.dot(snap.sigma * diff))) > beta) rec.covered = false;
    }
    if (!rec.covered) ++stats_.coverage_violations;

    if (!constraints_ && params_.devi_mode == SolverMode::exact) constraints_ = ConstraintSet::from_env(*env_);
    static const ConstraintSet kUnused;
    DeviOptions opts;
    opts.epsilon = epsilon;
    opts.q = q;
    opts.mode = params_.devi_mode;
    opts.v_max = params_.B;
    const DeviResult res = devi(*env_, *ellipsoid_, constraints_ ? *constraints_ : kUnused, opts);
    if (!res.converged && res.feasible)
        throw ConvergenceError("DEVI did not converge within " + std::to_string(devi_iteration_cap(opts)) +
                               " sweeps at step " + std::to_string(t));

    Q_ = res.Q;
    V_ = res.V;
    ++stats_.devi_calls;

    rec.v_init = V_[env_->initial_state()];
    rec.devi_iterations = res.iterations;
    rec.feasibility = res.feasible ? FeasibilityStatus::feasible : res.feasibility;
    if (reference_ && rec.covered) {
        rec.optimistic = V_[env_->initial_state()] <= (*reference_)[env_->initial_state()] + epsilon;
        ++stats_.optimism_checks;
        if (!*rec.optimistic) ++stats_.optimism_violations;
    }
    if (params_.devi_mode == SolverMode::exact && res.feasible) {
        rec.contraction = res.contracts(1.0 - q, kContractionSlack);
        if (!*rec.contraction) ++stats_.contraction_violations;
    }
    stats_.updates.push_back(std::move(rec));
}

void LevisAgent::end_episode()
{
    // Interval index bookkeeping only; value tables carry over.
    ++j_;
}

// ---------------------------------------------------------------------------

PerturbationConfig PerturbationConfig::for_horizon(double T_star, std::size_t episodes)
{
    if (!(T_star > 0.0) || episodes == 0) throw ConfigError("perturbation needs T* > 0 and K >= 1");
    return PerturbationConfig{1.0 / (T_star * static_cast<double>(episodes)), T_star};
}

PerturbedAgent::PerturbedAgent(EnvPtr env, const AgentConfig& config, const PerturbationConfig& perturbation)
    : perturbation_(perturbation)
{
    if (!(perturbation.rho > 0.0)) throw ConfigError("perturbation rho must be > 0");
    if (!(perturbation.T_star > 0.0)) throw ConfigError("perturbation needs T* > 0");
    view_ = std::make_shared<const PerturbedCostSSP>(std::move(env), perturbation.rho);

    AgentConfig inner = config;
    inner.B = perturbation.bound(config.B);
    inner.c_min = perturbation.rho;
    inner.T_star = perturbation.T_star;
    if (!inner.levels) inner.levels = default_levels(config.B, perturbation.rho);
    inner_ = std::make_unique<LevisAgent>(view_, inner);
}

void PerturbedAgent::observe(StateId s, ActionId a, double cost, StateId next)
{
    inner_->observe(s, a, cost + perturbation_.rho, next);
}

}  // namespace linssp
