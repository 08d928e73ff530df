#include "linssp/harness.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace linssp {

namespace {

std::string fmt_real(double x)
{
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

template <class T>
void digest_field(std::ostringstream& os, const char* key, const std::optional<T>& v)
{
    os << key << '=';
    if (v)
        os << *v;
    else
        os << '-';
    os << ';';
}

std::uint64_t fnv1a(const std::string& text)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void write_row(std::ostream& out, const EpisodeRow& r)
{
    out << r.episode << ',' << r.steps << ',' << fmt_real(r.episode_cost) << ',' << fmt_real(r.cum_cost) << ','
        << fmt_real(r.cum_regret) << ',' << fmt_real(r.avg_regret) << ',' << r.devi_calls_cum << '\n';
}

std::size_t default_cap(const RunConfig& config, const LinearMixtureSSP& env,
                        const std::optional<PerturbationConfig>& perturbation)
{
    if (config.max_steps_per_episode) return *config.max_steps_per_episode;
    double c_min = config.agent.c_min.value_or(env.min_cost());
    if (!(c_min > 0.0) && perturbation) c_min = perturbation->rho;
    if (!(c_min > 0.0)) throw ConfigError("cannot derive max_steps_per_episode without a positive c_min");
    const double cap = std::ceil(1000.0 * config.agent.B / c_min);
    return static_cast<std::size_t>(std::max(1.0, cap));
}

}  // namespace

EnvPtr EnvSpec::build() const
{
    if (kind == "synthetic") return std::make_shared<SyntheticSSP>(synthetic.d, synthetic.delta, synthetic.Delta);
    if (kind == "explicit") {
        if (!explicit_env) throw ConfigError("explicit environment spec has no model");
        return explicit_env;
    }
    throw ConfigError("unknown environment kind '" + kind + "'");
}

std::string EnvSpec::describe() const
{
    std::ostringstream os;
    os << std::setprecision(17) << kind;
    if (kind == "synthetic") {
        os << "(d=" << synthetic.d << ",delta=" << synthetic.delta << ",Delta=" << synthetic.Delta << ')';
    } else if (explicit_env) {
        const auto& e = *explicit_env;
        os << "(S=" << e.num_states() << ",A=" << e.num_actions() << ",d=" << e.dim() << ",g=" << e.goal()
           << ",init=" << e.initial_state() << ",theta=";
        for (Eigen::Index i = 0; i < e.theta_star().size(); ++i) os << e.theta_star()[i] << ' ';
        os << ",cost=";
        for (StateId s = 0; s < e.num_states(); ++s)
            for (ActionId a = 0; a < e.num_actions(); ++a) os << e.cost(s, a) << ' ';
        os << ",phi=";
        for (StateId s = 0; s < e.num_states(); ++s)
            for (ActionId a = 0; a < e.num_actions(); ++a)
                for (StateId n = 0; n < e.num_states(); ++n) {
                    const Vector phi = e.feature(n, s, a);
                    for (Eigen::Index i = 0; i < phi.size(); ++i) os << phi[i] << ' ';
                }
        os << ')';
    }
    return os.str();
}

std::string RunConfig::label() const
{
    std::string name = to_string(agent.algorithm);
    if (perturbed()) name += "+rho";
    return name;
}

void RunConfig::validate() const
{
    if (episodes < 1) throw ConfigError("episodes (K) must be >= 1");
    if (max_steps_per_episode && *max_steps_per_episode < 1) throw ConfigError("max_steps_per_episode must be >= 1");
    if (perturbation) {
        if (perturbation->rho && !(*perturbation->rho > 0.0)) throw ConfigError("perturbation rho must be > 0");
        if (perturbation->T_star && !(*perturbation->T_star > 0.0)) throw ConfigError("perturbation T_star must be > 0");
    }
    if (agent.c_min && !(*agent.c_min > 0.0)) throw ConfigError("c_min must be > 0");
}

std::string config_digest(const RunConfig& config)
{
    std::ostringstream os;
    os << std::setprecision(17);
    os << "env=" << config.env.describe() << ';';
    os << "K=" << config.episodes << ";seed=" << config.seed << ';';
    digest_field(os, "cap", config.max_steps_per_episode);
    const AgentConfig& a = config.agent;
    os << "algo=" << to_string(a.algorithm) << ";B=" << a.B << ';';
    digest_field(os, "c_min", a.c_min);
    digest_field(os, "T_star", a.T_star);
    digest_field(os, "lambda", a.lambda);
    digest_field(os, "gamma", a.gamma);
    digest_field(os, "L", a.levels);
    os << "alpha=" << to_string(a.alpha_schedule) << ";delta=" << a.fail_prob << ";c128=" << a.beta_constant
       << ";mode=" << to_string(a.devi_mode) << ';';
    if (config.perturbation) {
        digest_field(os, "rho", config.perturbation->rho);
        digest_field(os, "rho_T", config.perturbation->T_star);
    } else {
        os << "rho=off;";
    }
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(os.str());
    return hex.str();
}

EpisodeLog run_episode(const LinearMixtureSSP& env, Learner& agent, std::mt19937_64& rng, std::size_t cap)
{
    EpisodeLog log;
    StateId s = env.initial_state();
    while (s != env.goal()) {
        if (log.steps >= cap) {
            log.truncated = true;
            break;
        }
        const ActionId a = agent.act(s);
        const double c = env.cost(s, a);
        const StateId next = sample_transition(env, s, a, rng);
        agent.observe(s, a, c, next);
        log.cost += c;
        ++log.steps;
        s = next;
    }
    agent.end_episode();
    return log;
}

double RunRecord::truncated_fraction() const
{
    return episodes.empty() ? 0.0 : static_cast<double>(truncated_episodes) / static_cast<double>(episodes.size());
}

std::unique_ptr<Learner> make_learner(const RunConfig& config, EnvPtr env, const OptimalSolution& oracle,
                                      std::optional<PerturbationConfig>* used_perturbation)
{
    if (used_perturbation) used_perturbation->reset();
    if (!config.perturbed()) {
        auto agent = std::make_unique<LevisAgent>(env, config.agent);
        agent->set_reference_values(oracle.values);
        return agent;
    }
    const PerturbationSpec spec = config.perturbation.value_or(PerturbationSpec{});
    const double T_star = spec.T_star.value_or(config.agent.T_star.value_or(oracle.T_star));
    PerturbationConfig p = PerturbationConfig::for_horizon(T_star, config.episodes);
    if (spec.rho) p.rho = *spec.rho;
    auto agent = std::make_unique<PerturbedAgent>(env, config.agent, p);
    // V*_rho = V* + rho T^{pi*} for the optimism diagnostic of the inner agent.
    ValueTable shifted = oracle.values;
    for (StateId s = 0; s < shifted.size(); ++s) shifted[s] += p.rho * oracle.hitting_times[s];
    agent->inner().set_reference_values(std::move(shifted));
    if (used_perturbation) *used_perturbation = p;
    return agent;
}

RunRecord run(const RunConfig& config)
{
    config.validate();
    const EnvPtr env = config.env.build();
    return run(config, exact_optimal_value(*env));
}

RunRecord run(const RunConfig& config, const OptimalSolution& oracle)
{
    config.validate();
    const EnvPtr env = config.env.build();

    RunRecord rec;
    rec.seed = config.seed;
    rec.digest = config_digest(config);
    rec.label = config.label();
    rec.v_star_init = oracle.values[env->initial_state()];
    rec.T_star = oracle.T_star;

    std::unique_ptr<Learner> agent = make_learner(config, env, oracle, &rec.perturbation);
    if (auto* p = dynamic_cast<PerturbedAgent*>(agent.get())) {
        rec.levels = p->inner().params().levels;
        rec.lambda = p->inner().params().lambda;
    } else if (auto* l = dynamic_cast<LevisAgent*>(agent.get())) {
        rec.levels = l->params().levels;
        rec.lambda = l->params().lambda;
    }
    const std::size_t cap = default_cap(config, *env, rec.perturbation);

    std::ofstream csv;
    if (!config.output.empty()) {
        csv.open(config.output);
        if (!csv) throw ConfigError("cannot open output file '" + config.output + "'");
        csv << kCsvHeader << '\n';
    }

    std::mt19937_64 rng(config.seed);
    double cum_cost = 0.0;
    rec.episodes.reserve(config.episodes);
    try {
        for (std::size_t k = 1; k <= config.episodes; ++k) {
            const EpisodeLog log = run_episode(*env, *agent, rng, cap);
            cum_cost += log.cost;
            EpisodeRow row;
            row.episode = k;
            row.steps = log.steps;
            row.episode_cost = log.cost;
            row.cum_cost = cum_cost;
            row.cum_regret = cum_cost - static_cast<double>(k) * rec.v_star_init;
            row.avg_regret = row.cum_regret / static_cast<double>(k);
            row.devi_calls_cum = agent->stats().devi_calls;
            row.truncated = log.truncated;
            rec.total_steps += log.steps;
            if (log.truncated) ++rec.truncated_episodes;
            rec.episodes.push_back(row);
            if (csv.is_open()) write_row(csv, row);
        }
    } catch (const std::exception& e) {
        if (csv.is_open()) {
            csv << "# truncated: " << e.what() << '\n';
            csv.flush();
        }
        throw;
    }

    rec.stats = agent->stats();
    rec.devi_calls = rec.stats.devi_calls;
    rec.coverage_violations = rec.stats.coverage_violations;
    return rec;
}

SweepResult sweep(const std::vector<RunConfig>& configs, std::size_t jobs)
{
    SweepResult out;
    out.rows.resize(configs.size());
    out.records.resize(configs.size());
    if (configs.empty()) return out;

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            const RunConfig& cfg = configs[i];
            SweepRow& row = out.rows[i];
            row.algo = cfg.label();
            row.seed = cfg.seed;
            row.episodes = cfg.episodes;
            try {
                RunRecord rec = run(cfg);
                row.regret = rec.regret();
                row.avg_regret = rec.avg_regret();
                row.total_steps = rec.total_steps;
                row.devi_calls = rec.devi_calls;
                row.coverage_violations = rec.coverage_violations;
                if (rec.truncated_episodes > 0)
                    row.message = std::to_string(rec.truncated_episodes) + " truncated episodes";
                out.records[i] = std::move(rec);
            } catch (const ConfigError& e) {
                row.status = "config_error";
                row.message = e.what();
            } catch (const std::exception& e) {
                row.status = "error";
                row.message = e.what();
            }
        }
    };

    const std::size_t n = std::clamp<std::size_t>(jobs, 1, configs.size());
    std::vector<std::thread> pool;
    pool.reserve(n - 1);
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows)
{
    out << kSweepHeader << '\n';
    for (const auto& r : rows) {
        out << r.algo << ',' << r.seed << ',' << r.episodes << ',' << fmt_real(r.regret) << ','
            << fmt_real(r.avg_regret) << ',' << r.total_steps << ',' << r.devi_calls << ',' << r.coverage_violations
            << ',' << r.status << '\n';
    }
}

void write_oracle_report(std::ostream& out, const LinearMixtureSSP& env, const OptimalSolution& sol,
                         std::optional<double> rho)
{
    out << std::setprecision(17);
    out << "env: " << env.kind() << " (S=" << env.num_states() << ", A=" << env.num_actions() << ", d=" << env.dim()
        << ")\n";
    out << "V*(s_init) = " << sol.values[env.initial_state()] << '\n';
    out << "T* = " << sol.T_star << '\n';
    out << "B* = " << sol.B_star << '\n';
    out << "value iteration sweeps = " << sol.iterations << ", Bellman residual = " << sol.bellman_residual << '\n';
    if (rho) out << "V*_rho(s_init) = V* + rho T* = " << sol.values[env.initial_state()] + *rho * sol.T_star << '\n';
    out << "state,V*,T_pi*,action\n";
    for (StateId s = 0; s < env.num_states(); ++s) {
        out << env.state_label(s) << ',' << sol.values[s] << ',' << sol.hitting_times[s] << ',';
        if (s == env.goal())
            out << "-";
        else
            out << env.action_label(sol.policy[s]);
        out << '\n';
    }
}

}  // namespace linssp
