#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "linssp/harness.hpp"

namespace linssp {

/**
 * YAML run config. Top-level keys: env, episodes, seed, max_steps_per_episode,
 * algo, agent, perturbation, output. Unknown keys are rejected.
 *
 *   env: {kind: synthetic, d: 4, delta: 0.25, Delta: 0.0833}
 *   env: {kind: explicit, num_states: S, num_actions: A, d: d, goal: g, init: s0,
 *         theta_star: [...], cost: [[c(s,a)]...], features: [[[phi(s'|s,a)]...]...]}
 *   perturbation: {rho: auto | <real>, T_star: <real>}
 */
RunConfig parse_run_config(const std::string& yaml_text);
RunConfig load_run_config(const std::string& path);

/// "a..b" (inclusive) or a single seed.
std::vector<std::uint64_t> parse_seed_range(const std::string& text);

/// Comma-separated algorithm names; "perturbed" selects levis_pp in perturbation mode.
std::vector<RunConfig> expand_sweep(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                    const std::string& algos);

}  // namespace linssp
