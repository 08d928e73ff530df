#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <thread>

#include "linssp/harness.hpp"

using namespace linssp;

namespace {

constexpr std::size_t kEpisodes = 2000;
constexpr std::uint64_t kSeeds = 10;

int failures = 0;

void report(int id, bool ok, const std::string& detail)
{
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

RunConfig acceptance_config(AlgorithmKind algo, std::uint64_t seed, bool perturbed)
{
    RunConfig cfg;
    cfg.env.kind = "synthetic";
    cfg.env.synthetic = SyntheticParams{4, 0.25, 1.0 / 12.0};
    cfg.episodes = kEpisodes;
    cfg.seed = seed;
    cfg.agent.B = 3.0;
    cfg.agent.lambda = 1.0;
    cfg.agent.fail_prob = 0.01;
    cfg.agent.devi_mode = SolverMode::fast;
    cfg.agent.algorithm = algo;
    if (perturbed) {
        cfg.agent.T_star = 3.0;
        cfg.perturbation = PerturbationSpec{};
    } else {
        cfg.agent.c_min = 1.0;
    }
    return cfg;
}

double mean(const std::vector<double>& v)
{
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double j_bound(const RunRecord& r)
{
    const double T = double(r.total_steps);
    return 4.0 * 4.0 * r.levels * std::log(1.0 + T / r.lambda) + 2.0 * std::log(T);
}

}  // namespace

int main()
{
    std::vector<RunConfig> configs;
    for (std::uint64_t s = 1; s <= kSeeds; ++s) configs.push_back(acceptance_config(AlgorithmKind::levis_pp, s, false));
    for (std::uint64_t s = 1; s <= kSeeds; ++s) configs.push_back(acceptance_config(AlgorithmKind::unweighted, s, false));
    for (std::uint64_t s = 1; s <= kSeeds; ++s) configs.push_back(acceptance_config(AlgorithmKind::levis_pp, s, true));
    const SweepResult res = sweep(configs, std::max(1u, std::thread::hardware_concurrency()));

    std::vector<const RunRecord*> levis, unweighted, perturbed;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (!res.records[i]) {
            std::printf("run %s seed %llu failed: %s\n", res.rows[i].algo.c_str(),
                        static_cast<unsigned long long>(res.rows[i].seed), res.rows[i].message.c_str());
            continue;
        }
        const RunRecord* r = &*res.records[i];
        (i < kSeeds ? levis : i < 2 * kSeeds ? unweighted : perturbed).push_back(r);
    }
    const bool complete = levis.size() == kSeeds && unweighted.size() == kSeeds && perturbed.size() == kSeeds;
    for (const auto* group : {&levis, &unweighted, &perturbed})
        for (const RunRecord* r : *group)
            if (r->truncated_fraction() >= 0.01)
                std::printf("note: %s seed %llu truncated %.2f%% of episodes\n", r->label.c_str(),
                            static_cast<unsigned long long>(r->seed), 100.0 * r->truncated_fraction());

    // 1. Average regret comparison and decrease.
    std::vector<double> lv_2000, lv_200, uw_2000, pt_2000;
    for (const auto* r : levis) {
        lv_2000.push_back(r->avg_regret());
        lv_200.push_back(r->regret_at(200) / 200.0);
    }
    for (const auto* r : unweighted) uw_2000.push_back(r->avg_regret());
    for (const auto* r : perturbed) pt_2000.push_back(r->avg_regret());
    const double m_lv = mean(lv_2000), m_lv200 = mean(lv_200), m_uw = mean(uw_2000), m_pt = mean(pt_2000);
    report(1, complete && m_lv < m_uw && m_lv < m_lv200,
           fmt("mean R_K/K levis_pp=%.6f unweighted=%.6f; levis_pp at K=200: %.6f", m_lv, m_uw, m_lv200));

    // 2. Sublinear growth.
    int sublinear = 0;
    std::string ratios;
    for (const auto* r : levis) {
        const double r500 = r->regret_at(500), r2000 = r->regret_at(2000);
        const bool ok = r500 > 0.0 && r2000 / r500 <= 3.0;
        sublinear += ok;
        ratios += fmt(" %.3f", r500 > 0.0 ? r2000 / r500 : std::nan(""));
    }
    report(2, complete && sublinear >= 8, fmt("R_2000/R_500 <= 3 in %d/10 seeds; ratios:", sublinear) + ratios);

    // 3. Coverage at interval updates.
    std::size_t updates = 0, covered = 0;
    for (const auto* r : levis) {
        updates += r->stats.updates.size();
        covered += r->stats.updates.size() - r->coverage_violations;
    }
    const double cov_rate = updates ? double(covered) / double(updates) : 0.0;
    report(3, complete && updates > 0 && cov_rate >= 0.99,
           fmt("theta* covered at %zu/%zu updates (%.4f)", covered, updates, cov_rate));

    // 4. Optimism where coverage held.
    std::size_t opt_checks = 0, opt_viol = 0;
    for (const auto* r : levis) {
        opt_checks += r->stats.optimism_checks;
        opt_viol += r->stats.optimism_violations;
    }
    const double opt_rate = opt_checks ? double(opt_viol) / double(opt_checks) : 1.0;
    report(4, complete && opt_checks > 0 && opt_rate <= 0.01,
           fmt("V_j(s_init) <= V* + eps_j violated at %zu/%zu covered updates", opt_viol, opt_checks));

    // 5. Variance estimator: exact with theta*, and live error bound.
    {
        const SyntheticSSP env(4, 0.25, 1.0 / 12.0);
        const int L = 4;
        const double B = 3.0;
        double worst = 0.0;
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> u(0.0, B);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> w{std::clamp(u(rng) / B, 0.0, 1.0), 0.0};
            const ActionId a = rng() % env.num_actions();
            const auto p = env.transition_distribution(SyntheticSSP::kInit, a);
            std::vector<Vector> feats;
            std::vector<std::vector<double>> powers;
            for (int l = 0; l < L; ++l) {
                if (l > 0)
                    for (double& x : w) x *= x;
                feats.push_back(env.feature_expectation(w, SyntheticSSP::kInit, a));
                powers.push_back(w);
            }
            for (int l = 0; l <= L - 2; ++l) {
                double m1 = 0.0, m2 = 0.0;
                for (StateId n = 0; n < 2; ++n) {
                    m1 += p[n] * powers[l][n];
                    m2 += p[n] * powers[l][n] * powers[l][n];
                }
                const double est = estimate_variance(l, feats[l], feats[l + 1], env.theta_star(), env.theta_star(), 1.0);
                worst = std::max(worst, std::abs(est - (m2 - m1 * m1)));
            }
        }
        std::size_t checks = 0, viol = 0;
        for (const auto* r : levis) {
            checks += r->stats.variance_checks;
            viol += r->stats.variance_violations;
        }
        const double live_rate = checks ? 1.0 - double(viol) / double(checks) : 0.0;
        report(5, complete && worst <= 1e-12 && checks > 0 && live_rate >= 0.99,
               fmt("pinned-theta max error %.3e; live bound held at %zu/%zu steps (%.4f)", worst, checks - viol, checks,
                   live_rate));
    }

    // 6. DEVI contraction in exact mode and singleton fixed points.
    std::optional<RunRecord> exact_run;
    {
        RunConfig cfg = acceptance_config(AlgorithmKind::levis_pp, 1, false);
        cfg.episodes = 100;
        cfg.agent.devi_mode = SolverMode::exact;
        std::string detail;
        bool ok = true;
        try {
            exact_run = run(cfg);
            std::size_t infeasible = 0;
            for (const auto& u : exact_run->stats.updates) infeasible += u.feasibility != FeasibilityStatus::feasible;
            ok = exact_run->stats.contraction_violations == 0 && infeasible == 0;
            detail = fmt("exact-mode run: %zu DEVI calls, %zu contraction violations, %zu non-feasible",
                         exact_run->devi_calls, exact_run->stats.contraction_violations, infeasible);
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exact-mode run failed: ") + e.what();
        }
        const SyntheticSSP env(4, 0.25, 1.0 / 12.0);
        const ConstraintSet set = ConstraintSet::from_env(env);
        const ConfidenceEllipsoid singleton(env.theta_star(), Matrix::Identity(4, 4), 0.0);
        DeviOptions opts;
        opts.epsilon = 1e-9;
        opts.mode = SolverMode::exact;
        opts.v_max = 3.0;
        opts.q = 0.0;
        const double v0 = devi(env, singleton, set, opts).V[SyntheticSSP::kInit];
        opts.q = 0.1;
        const double v1 = devi(env, singleton, set, opts).V[SyntheticSSP::kInit];
        ok = ok && std::abs(v0 - 3.0) <= 1e-6 && std::abs(v1 - 2.5) <= 1e-6;
        report(6, ok, detail + fmt("; singleton V(s_init)=%.9f (q=0), %.9f (q=0.1)", v0, v1));
    }

    // 7. Regression state against dense normal equations after 1000 steps.
    {
        AgentConfig cfg = acceptance_config(AlgorithmKind::levis_pp, 1, false).agent;
        auto env = std::make_shared<const SyntheticSSP>(4, 0.25, 1.0 / 12.0);
        double worst_theta = 0.0, worst_logdet = 0.0;
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            LevisAgent agent(env, cfg);
            const std::size_t L = agent.levels().size();
            std::vector<Matrix> sigma(L, Matrix::Identity(4, 4) * agent.params().lambda);
            std::vector<Vector> b(L, Vector::Zero(4));
            std::size_t steps = 0;
            agent.set_observer([&](const StepTrace& tr) {
                for (std::size_t l = 0; l < L; ++l) {
                    const double w = 1.0 / (tr.weights[l] * tr.weights[l]);
                    sigma[l] += w * tr.scaled_features[l] * tr.scaled_features[l].transpose();
                    b[l] += w * tr.responses[l] * tr.scaled_features[l];
                }
                ++steps;
            });
            std::mt19937_64 rng(seed);
            while (steps < 1000) {
                StateId s = env->initial_state();
                while (s != env->goal() && steps < 1000) {
                    const ActionId a = agent.act(s);
                    const StateId next = sample_transition(*env, s, a, rng);
                    agent.observe(s, a, env->cost(s, a), next);
                    s = next;
                }
                agent.end_episode();
            }
            for (std::size_t l = 0; l < L; ++l) {
                const Eigen::LLT<Matrix> llt(sigma[l]);
                const Vector theta = llt.solve(b[l]);
                const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
                worst_theta = std::max(worst_theta, (agent.levels()[l].theta() - theta).norm() / std::max(theta.norm(), 1e-300));
                worst_logdet = std::max(worst_logdet, std::abs(agent.levels()[l].log_det() - logdet) / std::max(1.0, std::abs(logdet)));
            }
        }
        report(7, worst_theta <= 1e-8 && worst_logdet <= 1e-8,
               fmt("max relative theta error %.3e, max log-det error %.3e", worst_theta, worst_logdet));
    }

    // 8. DEVI-call budget on every acceptance run.
    {
        std::size_t ok_runs = 0, total = 0;
        double worst_ratio = 0.0;
        auto check = [&](const RunRecord& r) {
            ++total;
            const double bound = j_bound(r);
            ok_runs += double(r.devi_calls) <= bound;
            worst_ratio = std::max(worst_ratio, double(r.devi_calls) / bound);
        };
        for (const auto* group : {&levis, &unweighted, &perturbed})
            for (const RunRecord* r : *group) check(*r);
        if (exact_run) check(*exact_run);
        report(8, complete && ok_runs == total,
               fmt("J within 4dL log(1+T/lambda) + 2 log T on %zu/%zu runs (max J/bound %.4f)", ok_runs, total,
                   worst_ratio));
    }

    // 9. Perturbation wrapper.
    {
        const double rho = perturbed.empty() ? 0.0 : perturbed.front()->perturbation->rho;
        const bool ok = complete && std::abs(m_pt - m_lv) <= 0.25 * std::abs(m_lv);
        report(9, ok,
               fmt("rho=%.6g, L=%d: mean R_K/K %.6f vs levis_pp %.6f (relative gap %.4f)", rho,
                   perturbed.empty() ? 0 : perturbed.front()->levels, m_pt, m_lv,
                   m_lv != 0.0 ? std::abs(m_pt - m_lv) / std::abs(m_lv) : std::nan("")));
    }

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
