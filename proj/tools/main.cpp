#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "linssp/config.hpp"
#include "linssp/harness.hpp"

namespace fs = std::filesystem;
using namespace linssp;

namespace {

std::string env_or(const char* name, const std::string& fallback)
{
    const char* v = std::getenv(name);
    return (v && *v) ? std::string(v) : fallback;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out)
{
    RunConfig cfg = load_run_config(path);
    if (seed) cfg.seed = *seed;
    cfg.output = env_or("LINSSP_OUT", cfg.output);
    if (!out.empty()) cfg.output = out;
    const RunRecord rec = run(cfg);
    std::cout << std::setprecision(10);
    std::cout << "run " << rec.label << " seed=" << rec.seed << " digest=" << rec.digest << '\n'
              << "  K=" << rec.episodes.size() << " T=" << rec.total_steps << " J=" << rec.devi_calls
              << " L=" << rec.levels << '\n'
              << "  R_K=" << rec.regret() << " R_K/K=" << rec.avg_regret() << " V*(s_init)=" << rec.v_star_init << '\n'
              << "  coverage violations=" << rec.coverage_violations << "/" << rec.stats.updates.size()
              << " truncated episodes=" << rec.truncated_episodes << '\n';
    if (rec.perturbation) std::cout << "  rho=" << rec.perturbation->rho << '\n';
    if (!cfg.output.empty()) std::cout << "  csv: " << cfg.output << '\n';
    if (rec.truncated_fraction() >= 0.01)
        std::cerr << "warning: " << rec.truncated_episodes << " episodes hit the step cap\n";
    return 0;
}

int cmd_sweep(const std::string& path, const std::string& seeds, const std::string& algos, std::size_t jobs,
              std::string out_dir)
{
    const RunConfig base = load_run_config(path);
    std::vector<RunConfig> configs = expand_sweep(base, parse_seed_range(seeds), algos);
    out_dir = env_or("LINSSP_OUT", out_dir);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        for (auto& cfg : configs) {
            std::string name = cfg.label();
            for (char& c : name)
                if (c == '+') c = '_';
            cfg.output = (fs::path(out_dir) / (name + "_seed" + std::to_string(cfg.seed) + ".csv")).string();
        }
    }
    const SweepResult res = sweep(configs, jobs);
    write_sweep_csv(std::cout, res.rows);
    if (!out_dir.empty()) {
        std::ofstream agg(fs::path(out_dir) / "aggregate.csv");
        write_sweep_csv(agg, res.rows);
    }
    for (const auto& row : res.rows)
        if (row.status != "ok") std::cerr << row.algo << " seed " << row.seed << ": " << row.message << '\n';
    return 0;
}

int cmd_oracle(const std::string& path)
{
    const RunConfig cfg = load_run_config(path);
    const EnvPtr env = cfg.env.build();
    const OptimalSolution sol = exact_optimal_value(*env);
    std::optional<double> rho;
    if (cfg.perturbed()) {
        const PerturbationSpec spec = cfg.perturbation.value_or(PerturbationSpec{});
        rho = spec.rho.value_or(1.0 / (spec.T_star.value_or(cfg.agent.T_star.value_or(sol.T_star)) *
                                       static_cast<double>(cfg.episodes)));
    }
    write_oracle_report(std::cout, *env, sol, rho);
    return 0;
}

int cmd_validate(const std::string& path)
{
    const RunConfig cfg = load_run_config(path);
    const EnvPtr env = cfg.env.build();
    const EnvValidation v = validate_env(*env);
    for (const auto& w : v.warnings) std::cout << "warning: " << w << '\n';
    for (const auto& e : v.errors) std::cout << "error: " << e << '\n';
    std::cout << (v.ok() ? "ok" : "invalid") << '\n';
    return v.ok() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Online learning in linear mixture stochastic shortest path problems"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    auto* run_cmd = app.add_subcommand("run", "Run one configuration and write the per-episode CSV");
    run_cmd->add_option("--config", config, "YAML run config")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--seed", seed, "Override the seed");
    run_cmd->add_option("--out", out, "CSV output path");

    std::string seeds;
    std::string algos = "levis_pp,unweighted";
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    if (const char* j = std::getenv("LINSSP_JOBS")) jobs = std::max(1, std::atoi(j));
    std::string out_dir;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run seeds x algorithms and print the aggregate table");
    sweep_cmd->add_option("--config", config, "YAML run config")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--seeds", seeds, "Seed range a..b")->required();
    sweep_cmd->add_option("--algos", algos, "levis_pp,unweighted,variance_only,perturbed");
    sweep_cmd->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--out", out_dir, "Directory for per-run CSVs and aggregate.csv");

    auto* oracle_cmd = app.add_subcommand("oracle", "Print V*, T*, B* and the optimal policy");
    oracle_cmd->add_option("--config", config, "YAML run config")->required()->check(CLI::ExistingFile);

    auto* validate_cmd = app.add_subcommand("validate-env", "Check the environment's model invariants");
    validate_cmd->add_option("--config", config, "YAML run config")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*run_cmd) return cmd_run(config, seed, out);
        if (*sweep_cmd) return cmd_sweep(config, seeds, algos, jobs, out_dir);
        if (*oracle_cmd) return cmd_oracle(config);
        if (*validate_cmd) return cmd_validate(config);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
