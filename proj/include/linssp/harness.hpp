#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "linssp/agent.hpp"
#include "linssp/env.hpp"

namespace linssp {

struct SyntheticParams {
    std::size_t d = 4;
    double delta = 0.25;
    double Delta = 1.0 / 12.0;
};

/// Environment description: the synthetic family or a fully enumerated model.
struct EnvSpec {
    std::string kind = "synthetic";
    SyntheticParams synthetic;
    EnvPtr explicit_env;  // set when kind == "explicit"

    EnvPtr build() const;
    /// Canonical text used in the config digest.
    std::string describe() const;
};

struct PerturbationSpec {
    std::optional<double> rho;     // default 1 / (T* K)
    std::optional<double> T_star;  // default agent T_star, then the oracle's T*
};

struct RunConfig {
    EnvSpec env;
    std::size_t episodes = 2000;
    std::uint64_t seed = 0;
    std::optional<std::size_t> max_steps_per_episode;  // default 1000 B / c_min
    AgentConfig agent;
    std::optional<PerturbationSpec> perturbation;
    std::string output;  // CSV path, empty for none

    bool perturbed() const { return perturbation.has_value() || !agent.c_min.has_value(); }
    /// "levis_pp", "unweighted", ... with "+rho" appended when perturbed.
    std::string label() const;
    void validate() const;
};

std::string config_digest(const RunConfig& config);

struct EpisodeLog {
    std::size_t steps = 0;
    double cost = 0.0;
    bool truncated = false;
};

/// Runs one episode from the initial state until the goal or the step cap.
EpisodeLog run_episode(const LinearMixtureSSP& env, Learner& agent, std::mt19937_64& rng, std::size_t cap);

struct EpisodeRow {
    std::size_t episode = 0;
    std::size_t steps = 0;
    double episode_cost = 0.0;
    double cum_cost = 0.0;
    double cum_regret = 0.0;
    double avg_regret = 0.0;
    std::size_t devi_calls_cum = 0;
    bool truncated = false;
};

struct RunRecord {
    std::vector<EpisodeRow> episodes;
    std::size_t total_steps = 0;
    std::size_t devi_calls = 0;
    std::size_t coverage_violations = 0;
    std::size_t truncated_episodes = 0;
    std::uint64_t seed = 0;
    std::string digest;
    std::string label;
    double v_star_init = 0.0;
    double T_star = 0.0;
    int levels = 0;
    double lambda = 0.0;
    std::optional<PerturbationConfig> perturbation;
    AgentStats stats;

    double regret() const { return episodes.empty() ? 0.0 : episodes.back().cum_regret; }
    double avg_regret() const { return episodes.empty() ? 0.0 : episodes.back().avg_regret; }
    /// Cumulative regret after k episodes (1-based).
    double regret_at(std::size_t k) const { return episodes.at(k - 1).cum_regret; }
    double truncated_fraction() const;
};

/// Agent for a run config; the perturbation wrapper is used in perturbation mode.
std::unique_ptr<Learner> make_learner(const RunConfig& config, EnvPtr env, const OptimalSolution& oracle,
                                      std::optional<PerturbationConfig>* used_perturbation = nullptr);

/// Executes config.episodes episodes and streams the CSV to config.output when set.
/// Regret is measured against the exact V*(s_init).
RunRecord run(const RunConfig& config);
RunRecord run(const RunConfig& config, const OptimalSolution& oracle);

inline constexpr const char* kCsvHeader = "episode,steps,episode_cost,cum_cost,cum_regret,avg_regret,devi_calls_cum";

struct SweepRow {
    std::string algo;
    std::uint64_t seed = 0;
    std::size_t episodes = 0;
    double regret = 0.0;
    double avg_regret = 0.0;
    std::size_t total_steps = 0;
    std::size_t devi_calls = 0;
    std::size_t coverage_violations = 0;
    std::string status = "ok";
    std::string message;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::optional<RunRecord>> records;  // empty entry for failed runs
};

/// Runs independent configs on up to `jobs` threads. Rows keep the input order.
/// A failed run is reported in its row and does not stop the others.
SweepResult sweep(const std::vector<RunConfig>& configs, std::size_t jobs);

inline constexpr const char* kSweepHeader =
    "algo,seed,K,R_K,R_K_over_K,T,J,coverage_violations,status";

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Human-readable V*, T*, B*, and the optimal policy.
void write_oracle_report(std::ostream& out, const LinearMixtureSSP& env, const OptimalSolution& sol,
                         std::optional<double> rho = std::nullopt);

}  // namespace linssp
