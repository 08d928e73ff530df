#include "linssp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace linssp {

namespace {

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed)
{
    if (!node.IsMap()) throw ConfigError("'" + where + "' must be a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T read(const YAML::Node& node, const std::string& key)
{
    try {
        return node[key].as<T>();
    } catch (const YAML::Exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

template <class T>
std::optional<T> read_opt(const YAML::Node& node, const std::string& key)
{
    if (!node[key] || node[key].IsNull()) return std::nullopt;
    return read<T>(node, key);
}

template <class T>
T required(const YAML::Node& node, const std::string& key, const std::string& where)
{
    if (!node[key]) throw ConfigError("missing '" + key + "' in " + where);
    return read<T>(node, key);
}

EnvPtr parse_explicit(const YAML::Node& n)
{
    const auto S = required<std::size_t>(n, "num_states", "env");
    const auto A = required<std::size_t>(n, "num_actions", "env");
    const auto d = required<std::size_t>(n, "d", "env");
    const auto goal = required<std::size_t>(n, "goal", "env");
    const auto init = required<std::size_t>(n, "init", "env");
    const auto theta = required<std::vector<double>>(n, "theta_star", "env");
    const auto cost = required<std::vector<std::vector<double>>>(n, "cost", "env");
    const auto feats = required<std::vector<std::vector<std::vector<std::vector<double>>>>>(n, "features", "env");

    if (theta.size() != d) throw ConfigError("theta_star must have d entries");
    if (cost.size() != S) throw ConfigError("cost must have num_states rows");
    if (feats.size() != S) throw ConfigError("features must have num_states entries");
    std::vector<double> costs;
    std::vector<Vector> features;
    for (std::size_t s = 0; s < S; ++s) {
        if (cost[s].size() != A) throw ConfigError("cost row " + std::to_string(s) + " must have num_actions entries");
        if (feats[s].size() != A) throw ConfigError("features[" + std::to_string(s) + "] must have num_actions entries");
        for (std::size_t a = 0; a < A; ++a) {
            costs.push_back(cost[s][a]);
            if (feats[s][a].size() != S) throw ConfigError("features[s][a] must list one vector per next state");
            for (std::size_t next = 0; next < S; ++next) {
                const auto& v = feats[s][a][next];
                if (v.size() != d) throw ConfigError("feature vectors must have d entries");
                features.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(d)));
            }
        }
    }
    try {
        return std::make_shared<ExplicitSSP>(S, A, d, std::move(features), std::move(costs), goal, init,
                                             Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(d)));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("explicit environment: ") + e.what());
    } catch (const ModelError& e) {
        throw ConfigError(std::string("explicit environment: ") + e.what());
    }
}

EnvSpec parse_env(const YAML::Node& n)
{
    EnvSpec spec;
    if (!n) return spec;
    if (!n.IsMap()) throw ConfigError("'env' must be a mapping");
    spec.kind = n["kind"] ? read<std::string>(n, "kind") : "synthetic";
    if (spec.kind == "synthetic") {
        check_keys(n, "env", {"kind", "d", "delta", "Delta"});
        spec.synthetic.d = read_opt<std::size_t>(n, "d").value_or(spec.synthetic.d);
        spec.synthetic.delta = read_opt<double>(n, "delta").value_or(spec.synthetic.delta);
        spec.synthetic.Delta = read_opt<double>(n, "Delta").value_or(spec.synthetic.Delta);
        try {
            (void)spec.build();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("synthetic environment: ") + e.what());
        } catch (const ModelError& e) {
            throw ConfigError(std::string("synthetic environment: ") + e.what());
        }
    } else if (spec.kind == "explicit") {
        check_keys(n, "env", {"kind", "num_states", "num_actions", "d", "goal", "init", "theta_star", "cost", "features"});
        spec.explicit_env = parse_explicit(n);
    } else {
        throw ConfigError("unknown env kind '" + spec.kind + "' (expected synthetic or explicit)");
    }
    return spec;
}

void parse_agent(const YAML::Node& n, AgentConfig& agent)
{
    if (!n) return;
    check_keys(n, "agent", {"B", "c_min", "T_star", "lambda", "gamma", "alpha_schedule", "levels", "fail_prob",
                            "beta_constant", "devi_mode", "algo"});
    agent.B = read_opt<double>(n, "B").value_or(agent.B);
    agent.c_min = read_opt<double>(n, "c_min");
    agent.T_star = read_opt<double>(n, "T_star");
    agent.lambda = read_opt<double>(n, "lambda");
    agent.gamma = read_opt<double>(n, "gamma");
    if (auto s = read_opt<std::string>(n, "alpha_schedule")) agent.alpha_schedule = parse_alpha_schedule(*s);
    agent.levels = read_opt<int>(n, "levels");
    agent.fail_prob = read_opt<double>(n, "fail_prob").value_or(agent.fail_prob);
    agent.beta_constant = read_opt<double>(n, "beta_constant").value_or(agent.beta_constant);
    if (auto s = read_opt<std::string>(n, "devi_mode")) agent.devi_mode = parse_solver_mode(*s);
    if (auto s = read_opt<std::string>(n, "algo")) agent.algorithm = parse_algorithm(*s);
}

}  // namespace

RunConfig parse_run_config(const std::string& yaml_text)
{
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("YAML parse error: ") + e.what());
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    check_keys(root, "config",
               {"env", "episodes", "seed", "max_steps_per_episode", "algo", "agent", "perturbation", "output"});

    RunConfig cfg;
    // Without an agent block the synthetic defaults apply: B = 3, c_min = 1.
    cfg.agent.c_min = 1.0;
    cfg.env = parse_env(root["env"]);
    if (root["agent"]) {
        cfg.agent.c_min.reset();
        parse_agent(root["agent"], cfg.agent);
    }
    if (auto algo = read_opt<std::string>(root, "algo")) cfg.agent.algorithm = parse_algorithm(*algo);
    cfg.episodes = read_opt<std::size_t>(root, "episodes").value_or(cfg.episodes);
    cfg.seed = read_opt<std::uint64_t>(root, "seed").value_or(cfg.seed);
    cfg.max_steps_per_episode = read_opt<std::size_t>(root, "max_steps_per_episode");
    cfg.output = read_opt<std::string>(root, "output").value_or("");

    if (const YAML::Node p = root["perturbation"]; p && !p.IsNull()) {
        check_keys(p, "perturbation", {"rho", "T_star"});
        PerturbationSpec spec;
        if (p["rho"] && !p["rho"].IsNull()) {
            const auto text = read<std::string>(p, "rho");
            if (text != "auto") spec.rho = read<double>(p, "rho");
        }
        spec.T_star = read_opt<double>(p, "T_star");
        cfg.perturbation = spec;
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str());
}

std::vector<std::uint64_t> parse_seed_range(const std::string& text)
{
    auto parse_one = [&](const std::string& s) -> std::uint64_t {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("bad seed '" + s + "' in '" + text + "'");
        return std::stoull(s);
    };
    const auto dots = text.find("..");
    if (dots == std::string::npos) return {parse_one(text)};
    const std::uint64_t lo = parse_one(text.substr(0, dots));
    const std::uint64_t hi = parse_one(text.substr(dots + 2));
    if (hi < lo) throw ConfigError("empty seed range '" + text + "'");
    std::vector<std::uint64_t> out;
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
}

std::vector<RunConfig> expand_sweep(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                    const std::string& algos)
{
    std::vector<std::string> names;
    std::stringstream ss(algos);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) names.push_back(item);

    std::vector<RunConfig> out;
    for (const auto& name : names) {
        RunConfig cfg = base;
        if (name == "perturbed") {
            cfg.agent.algorithm = AlgorithmKind::levis_pp;
            if (!cfg.perturbation) cfg.perturbation = PerturbationSpec{};
        } else {
            cfg.agent.algorithm = parse_algorithm(name);
        }
        for (std::uint64_t seed : seeds) {
            cfg.seed = seed;
            cfg.output.clear();
            out.push_back(cfg);
        }
    }
    return out;
}

}  // namespace linssp
