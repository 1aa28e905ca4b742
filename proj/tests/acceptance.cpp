// Acceptance suite: one check per shipping criterion, each printed as a
// single pass/fail line. Exits non-zero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "conquer/depparse.hpp"
#include "conquer/experiment.hpp"
#include "oracles.hpp"

using namespace conquer;

namespace {

std::string g_cli_path;  // optional: path to the CLI binary for criterion 11

double empirical_p_plus(double r_m, double r_n, int n_draws, Rng& rng, bool noisy) {
    int pos = 0;
    for (int i = 0; i < n_draws; ++i) {
        const int y = noisy ? draw_feedback_noisy_reward(r_m, r_n, rng)
                            : draw_feedback(r_m, r_n, rng);
        if (y == +1) ++pos;
    }
    return static_cast<double>(pos) / n_draws;
}

SparseVec random_unit(std::uint32_t dim, Rng& rng) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    return SparseVec::from_dense(v).normalized();
}

// 1. empirical P(y=+1) matches the feedback law within 0.01 on the 25-point
//    reward grid; the maximal-gap case is deterministic.
bool criterion_feedback_law(std::string& detail) {
    const std::vector<double> grid{-1.0, -0.5, 0.0, 0.5, 1.0};
    const int n = 100000;
    Rng rng(101);
    double worst = 0.0;
    for (double rm : grid)
        for (double rn : grid) {
            const double p = feedback_prob_positive(rm, rn);
            const double hat = empirical_p_plus(rm, rn, n, rng, false);
            worst = std::max(worst, std::fabs(hat - p));
        }
    for (int i = 0; i < n; ++i)
        if (draw_feedback(1.0, -1.0, rng) != +1) {
            detail = "extreme case produced a -1";
            return false;
        }
    std::ostringstream os;
    os << "max |p_hat - p| = " << worst;
    detail = os.str();
    return worst <= 0.01;
}

// 2. the noisy-reward mechanism agrees with the direct law within 0.01
//    everywhere on the grid.
bool criterion_noisy_equivalence(std::string& detail) {
    const std::vector<double> grid{-1.0, -0.5, 0.0, 0.5, 1.0};
    const int n = 100000;
    Rng rng(202);
    double worst = 0.0;
    for (double rm : grid)
        for (double rn : grid) {
            const double a = empirical_p_plus(rm, rn, n, rng, false);
            const double b = empirical_p_plus(rm, rn, n, rng, true);
            worst = std::max(worst, std::fabs(a - b));
        }
    std::ostringstream os;
    os << "max mechanism gap = " << worst;
    detail = os.str();
    return worst <= 0.01;
}

// 3. maintained inverse vs fresh direct inversion after 1000 updates at D=10.
bool criterion_inverse_maintenance(std::string& detail) {
    SecondOrderMatrix a(MatrixKind::full, 10, 0);
    Rng rng(303);
    for (int t = 0; t < 1000; ++t) a.rank_one_update(random_unit(10, rng));
    oracle::Mat dense(10, std::vector<double>(10));
    for (std::uint32_t i = 0; i < 10; ++i)
        for (std::uint32_t j = 0; j < 10; ++j) dense[i][j] = a.at(i, j);
    const auto fresh = oracle::dense_invert(dense);
    double worst = 0.0;
    for (std::uint32_t i = 0; i < 10; ++i)
        for (std::uint32_t j = 0; j < 10; ++j)
            worst = std::max(worst, std::fabs(fresh[i][j] - a.inv_at(i, j)));
    std::ostringstream os;
    os << "max |maintained - fresh| = " << worst;
    detail = os.str();
    return worst <= 1e-8;
}

// 4. projection feasible within 1e-6 and within 1e-4 objective of a QP oracle
//    on 100 random instances with D <= 5 and <= 5 constraints.
bool criterion_projection(std::string& detail) {
    Rng rng(404);
    int checked = 0;
    double worst_gap = 0.0, worst_viol = 0.0;
    while (checked < 100) {
        const std::uint32_t d = 2 + static_cast<std::uint32_t>(rng.below(4));
        const std::size_t n_con = 1 + rng.below(5);
        SecondOrderMatrix a(MatrixKind::full, d);
        for (std::uint64_t i = rng.below(4); i > 0; --i) a.rank_one_update(random_unit(d, rng));

        std::vector<SparseVec> items;
        oracle::Mat phis;
        for (std::size_t i = 0; i < n_con; ++i) {
            items.push_back(random_unit(d, rng));
            phis.push_back(items.back().to_dense());
        }
        std::vector<double> w0(d);
        for (auto& x : w0) x = 3.0 * rng.normal();

        oracle::Mat am(d, std::vector<double>(d));
        for (std::uint32_t i = 0; i < d; ++i)
            for (std::uint32_t j = 0; j < d; ++j) am[i][j] = a.at(i, j);
        const auto expect = oracle::qp_box_scores(am, w0, phis);
        if (!expect) continue;
        ++checked;

        const auto got = project_weights(a, w0, items, 2000, 1e-8);
        for (const auto& it : items)
            worst_viol = std::max(
                worst_viol, std::fabs(dot(std::span<const double>(got.w), it)) - 1.0);
        worst_gap = std::max(worst_gap,
                             std::fabs(oracle::mahalanobis_half(am, got.w, w0) -
                                       oracle::mahalanobis_half(am, *expect, w0)));
    }
    std::ostringstream os;
    os << "max violation = " << worst_viol << ", max objective gap = " << worst_gap;
    detail = os.str();
    return worst_viol <= 1e-6 && worst_gap <= 1e-4;
}

// 5. sublinearity proxy: with the analysis eta schedule, mean R_T/T at
//    T = 2e4 is at most half its value at T = 2e3, over 20 seeds.
bool criterion_sublinearity(std::string& detail) {
    const std::uint64_t t_short = 2000, t_long = 20000;
    double rate_short = 0.0, rate_long = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SynthSpec spec;
        spec.dim = 20;
        spec.k = 5;
        spec.u = random_direction(20, derive_seed(505, seed), 1.0);
        spec.seed = derive_seed(606, seed);
        SynthEnv env(spec);

        OnlineRunConfig rc;
        rc.policy = PolicyKind::gnc;
        rc.kind = MatrixKind::full;
        rc.theoretical_eta = true;
        rc.delta = 0.1;
        rc.seed = derive_seed(707, seed);
        const auto res = run_conquer_online(env, t_long, rc);

        double cum = 0.0;
        for (std::uint64_t t = 0; t < t_long; ++t) {
            cum += res.trace[t].instantaneous_regret;
            if (t + 1 == t_short) rate_short += cum / static_cast<double>(t_short);
        }
        rate_long += cum / static_cast<double>(t_long);
    }
    rate_short /= 20.0;
    rate_long /= 20.0;
    std::ostringstream os;
    os << "mean R_T/T: " << rate_short << " @2e3 -> " << rate_long << " @2e4";
    detail = os.str();
    return rate_long <= 0.5 * rate_short;
}

// 6. per-round bound r_t <= 2 q_t + 2 eps_t violated in at most 1% of rounds
//    aggregated over 50 seeds.
bool criterion_regret_bound(std::string& detail) {
    std::size_t violations = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SynthSpec spec;
        spec.dim = 20;
        spec.k = 5;
        spec.u = random_direction(20, derive_seed(515, seed), 1.0);
        spec.seed = derive_seed(616, seed);
        SynthEnv env(spec);

        OnlineRunConfig rc;
        rc.policy = PolicyKind::gnc;
        rc.kind = MatrixKind::full;
        rc.theoretical_eta = true;
        rc.delta = 0.1;
        rc.seed = derive_seed(717, seed);
        const auto res = run_conquer_online(env, 10000, rc);
        for (const auto& rec : res.trace) {
            ++total;
            if (!regret_bound_holds(rec)) ++violations;
        }
    }
    const double frac = static_cast<double>(violations) / static_cast<double>(total);
    std::ostringstream os;
    os << violations << "/" << total << " rounds violated (" << frac * 100.0 << "%)";
    detail = os.str();
    return frac <= 0.01;
}

// 7. miniature text experiment: every pair-selection policy beats the 0.45
//    error bar on the synthetic 2000-review corpus.
bool criterion_text_learning(std::string& detail) {
    ExperimentConfig cfg;
    cfg.algorithms = {Algorithm::ttg, Algorithm::gnr, Algorithm::gnu, Algorithm::gnc};
    cfg.k = 5;
    cfg.dim = 1u << 16;
    cfg.matrix = MatrixKind::diagonal;
    cfg.repetitions = 10;
    cfg.seed = 808;
    cfg.data.type = DataConfig::Type::synth_text;
    cfg.data.synth_reviews = 2000;
    cfg.write_traces = false;

    const auto result = run_experiment(cfg);
    std::ostringstream os;
    bool ok = true;
    for (const auto& a : result.algos) {
        os << algorithm_name(a.algo) << "=" << a.mean_error << " ";
        ok = ok && a.mean_error < 0.45;
    }
    detail = os.str() + "(bar 0.45)";
    return ok;
}

// 8. query skipping: tiny eta on widely separated rewards skips some rounds
//    and leaves the model untouched when it does; a huge eta never skips.
bool criterion_gnc_skip(std::string& detail) {
    SynthSpec spec;
    spec.dim = 8;
    spec.k = 5;
    spec.items = ItemDist::basis;
    spec.u = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};  // rewards are u components
    spec.seed = 909;

    const auto run_with_eta = [&](double eta, std::size_t& skips, bool& mutated_on_skip) {
        SynthEnv env(spec);
        LinearModel model(spec.dim, MatrixKind::full, eta);
        Rng policy_rng(1), fb_rng(2);
        skips = 0;
        mutated_on_skip = false;
        for (int t = 0; t < 500; ++t) {
            const auto round = env.next();
            const auto w_before = model.weights();
            const auto a_before = model.matrix().raw();
            const auto rounds_before = model.rounds();

            const auto dec = model.select_pair(round.items, PolicyKind::gnc, policy_rng);
            if (dec.queried) {
                const int y =
                    draw_feedback(round.rewards[dec.m], round.rewards[*dec.n], fb_rng);
                model.update(round.items[dec.m], round.items[*dec.n], y);
            } else {
                ++skips;
                if (model.weights() != w_before || model.rounds() != rounds_before ||
                    model.matrix().raw() != a_before)
                    mutated_on_skip = true;
            }
        }
    };

    std::size_t skips_small = 0, skips_large = 0;
    bool mutated_small = false, mutated_large = false;
    run_with_eta(1e-4, skips_small, mutated_small);
    run_with_eta(1e3, skips_large, mutated_large);

    std::ostringstream os;
    os << "skips: eta=1e-4 -> " << skips_small << "/500, eta=1e3 -> " << skips_large << "/500";
    detail = os.str();
    return skips_small > 0 && !mutated_small && skips_large == 0;
}

// 9. CLE equals exhaustive enumeration on 200 random digraphs (exact totals).
bool criterion_cle(std::string& detail) {
    Rng rng(1010);
    int done = 0, mismatched = 0;
    while (done < 200) {
        const std::size_t n = 2 + rng.below(4);
        const double ninf = -std::numeric_limits<double>::infinity();
        std::vector<std::vector<double>> w(n, std::vector<double>(n, ninf));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 1; j < n; ++j) {
                if (i == j) continue;
                if (!rng.bernoulli(0.15))
                    w[i][j] = static_cast<double>(rng.below(2049)) / 64.0 - 16.0;
            }
        const auto best = oracle::brute_force_arborescence(w);
        if (!best) continue;
        ++done;
        const auto t = cle_max_arborescence(w);
        if (!is_arborescence(t, n) || tree_score(w, t) != best->second) ++mismatched;
    }
    std::ostringstream os;
    os << mismatched << "/200 mismatches";
    detail = os.str();
    return mismatched == 0;
}

// 10. parsing learner: final-quarter edge accuracy beats the first quarter
//     in at least 18 of 20 seeds (5-word sentences, 5000 rounds).
bool criterion_parse_learning(std::string& detail) {
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SynthParseEnv env({.num_words = 5, .dim = 24, .u_norm = 0.9, .seed = derive_seed(1111, seed)});
        LinearModel model(24, MatrixKind::full, 1.0);
        Rng fb_rng(derive_seed(1212, seed));
        const int rounds = 5000;
        double first = 0.0, last = 0.0;
        for (int t = 0; t < rounds; ++t) {
            const auto s = env.next();
            const auto& gold = s.gold_parents();
            const auto res =
                dp_step(model, s, [&](std::size_t dep, std::size_t hm, std::size_t hn) {
                    return simulated_annotator(dep, hm, hn, gold, fb_rng);
                });
            const double acc = edge_accuracy(res.m_tree, gold);
            if (t < rounds / 4) first += acc;
            if (t >= 3 * rounds / 4) last += acc;
        }
        if (last > first) ++improved;
    }
    std::ostringstream os;
    os << improved << "/20 seeds improved";
    detail = os.str();
    return improved >= 18;
}

// 11. two identical `run` invocations produce byte-identical summary CSVs.
bool criterion_determinism(std::string& detail) {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "conquer_acceptance_det";
    fs::remove_all(base);
    fs::create_directories(base);

    const auto read = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };

    std::string a, b;
    if (!g_cli_path.empty()) {
        for (const char* tag : {"a", "b"}) {
            const std::string cmd = g_cli_path + " run --algo ttg --algo gnc --reps 3 --seed 42" +
                                    " --out " + (base / tag).string() + " >/dev/null 2>&1";
            if (std::system(cmd.c_str()) != 0) {
                detail = "CLI run failed";
                return false;
            }
        }
        a = read(base / "a" / "summary.csv");
        b = read(base / "b" / "summary.csv");
        detail = "via CLI binary";
    } else {
        ExperimentConfig cfg;
        cfg.algorithms = {Algorithm::ttg, Algorithm::gnc};
        cfg.repetitions = 3;
        cfg.seed = 42;
        cfg.data.type = DataConfig::Type::synth_text;
        cfg.data.synth_reviews = 600;
        cfg.dim = 1u << 12;
        cfg.write_traces = false;
        cfg.out_dir = (base / "a").string();
        run_experiment(cfg);
        cfg.out_dir = (base / "b").string();
        run_experiment(cfg);
        a = read(base / "a" / "summary.csv");
        b = read(base / "b" / "summary.csv");
        detail = "in-process (no CLI path given)";
    }
    fs::remove_all(base);
    return !a.empty() && a == b;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli_path = argv[1];

    struct Criterion {
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Criterion> criteria{
        {"feedback law on the reward grid", criterion_feedback_law},
        {"noisy-reward mechanism equivalence", criterion_noisy_equivalence},
        {"incremental inverse maintenance", criterion_inverse_maintenance},
        {"projection matches a QP oracle", criterion_projection},
        {"regret sublinearity with the analysis eta", criterion_sublinearity},
        {"per-round regret bound diagnostic", criterion_regret_bound},
        {"text experiment beats chance", criterion_text_learning},
        {"query skipping without state changes", criterion_gnc_skip},
        {"maximum arborescence decoding", criterion_cle},
        {"parsing learner improves", criterion_parse_learning},
        {"deterministic summary output", criterion_determinism},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = criteria[i].fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %zu: %s — %s (%.1fs)\n", ok ? "PASS" : "FAIL", i + 1,
                    criteria[i].name, detail.c_str(), secs);
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (failures > 0) std::printf("%d criterion(s) FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
