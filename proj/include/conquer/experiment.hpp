#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "conquer/baselines.hpp"
#include "conquer/environment.hpp"
#include "conquer/linear_model.hpp"
#include "conquer/text.hpp"
#include "conquer/trace.hpp"

namespace conquer {

enum class Algorithm { ttg, gnr, gnu, gnc, confidit, banditron };

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::ttg: return "ttg";
        case Algorithm::gnr: return "gnr";
        case Algorithm::gnu: return "gnu";
        case Algorithm::gnc: return "gnc";
        case Algorithm::confidit: return "confidit";
        case Algorithm::banditron: return "banditron";
    }
    return "?";
}

inline std::optional<Algorithm> algorithm_from_name(std::string_view s) {
    if (s == "ttg") return Algorithm::ttg;
    if (s == "gnr") return Algorithm::gnr;
    if (s == "gnu") return Algorithm::gnu;
    if (s == "gnc") return Algorithm::gnc;
    if (s == "confidit") return Algorithm::confidit;
    if (s == "banditron") return Algorithm::banditron;
    return std::nullopt;
}

inline std::optional<PolicyKind> pair_policy_of(Algorithm a) {
    switch (a) {
        case Algorithm::ttg: return PolicyKind::ttg;
        case Algorithm::gnr: return PolicyKind::gnr;
        case Algorithm::gnu: return PolicyKind::gnu;
        case Algorithm::gnc: return PolicyKind::gnc;
        default: return std::nullopt;
    }
}

struct HyperGrid {
    std::vector<double> eta{0.01, 0.1, 1.0, 10.0};
    std::vector<double> gamma{0.05, 0.1, 0.2, 0.3};
    std::vector<double> alpha{0.0, 0.5, 1.0};
};

struct DataConfig {
    enum class Type { tsv, svm, synth_text, synth_vec };
    Type type = Type::synth_text;
    std::string path;                  // tsv / svm
    std::size_t synth_reviews = 2000;  // synth_text
    std::uint32_t vec_dim = 20;        // synth_vec
    double vec_noise = 0.0;
    double u_norm = 1.0;
    std::uint64_t u_seed = 1;
};

struct ExperimentConfig {
    std::vector<Algorithm> algorithms{Algorithm::ttg,      Algorithm::gnr,
                                      Algorithm::gnu,      Algorithm::gnc,
                                      Algorithm::confidit, Algorithm::banditron};
    std::size_t k = 5;
    std::uint32_t dim = 1u << 16;  // hash dimension for text sources
    MatrixKind matrix = MatrixKind::diagonal;
    HyperGrid grid;
    double delta = 0.1;
    int repetitions = 10;
    std::uint64_t seed = 7;
    bool project = false;
    std::size_t train_rounds = 0;  // 0 = one pass over the split (size / K)
    std::size_t dev_rounds = 0;
    std::size_t test_rounds = 0;
    std::string out_dir;  // empty = no files written
    DataConfig data;
    bool write_traces = true;
};

struct HyperParams {
    double eta = 1.0;
    double gamma = 0.1;
    double alpha = 1.0;
};

// --- dataset assembly -------------------------------------------------------

struct Dataset {
    bool is_synth_vec = false;
    // text-like sources
    std::vector<FeaturizedReview> reviews;
    DatasetSplit split;
    std::uint32_t dim = 0;
    // synth-vec source
    SynthSpec synth;
};

namespace exp_detail {

inline constexpr std::uint64_t kSaltCorpus = 0xc0a5;
inline constexpr std::uint64_t kSaltSplit = 0x5a17;
inline constexpr std::uint64_t kSaltDev = 0xd3a;
inline constexpr std::uint64_t kSaltTrain = 0x7aa1;
inline constexpr std::uint64_t kSaltTest = 0x7e57;
inline constexpr std::uint64_t kSaltPolicy = 0x901;
inline constexpr std::uint64_t kSaltFeedback = 0xfb;
inline constexpr std::uint64_t kSaltTune = 0xd37;

enum class Phase { dev, train, test };

inline std::uint64_t phase_salt(Phase p) {
    switch (p) {
        case Phase::dev: return kSaltDev;
        case Phase::train: return kSaltTrain;
        case Phase::test: return kSaltTest;
    }
    return 0;
}

}  // namespace exp_detail

inline Dataset load_dataset(const ExperimentConfig& cfg) {
    Dataset ds;
    switch (cfg.data.type) {
        case DataConfig::Type::synth_vec: {
            ds.is_synth_vec = true;
            ds.dim = cfg.data.vec_dim;
            ds.synth.dim = cfg.data.vec_dim;
            ds.synth.k = cfg.k;
            ds.synth.noise = cfg.data.vec_noise;
            ds.synth.u = random_direction(cfg.data.vec_dim, cfg.data.u_seed, cfg.data.u_norm);
            return ds;
        }
        case DataConfig::Type::synth_text: {
            const auto corpus = synthetic_review_corpus(
                cfg.data.synth_reviews, derive_seed(cfg.seed, exp_detail::kSaltCorpus));
            ds.reviews = featurize_corpus(corpus, cfg.dim);
            break;
        }
        case DataConfig::Type::tsv: {
            const auto corpus = load_reviews_tsv(cfg.data.path);
            ds.reviews = featurize_corpus(corpus, cfg.dim);
            break;
        }
        case DataConfig::Type::svm: {
            ds.reviews = load_featurized(cfg.data.path);
            break;
        }
    }
    ds.dim = cfg.data.type == DataConfig::Type::svm && !ds.reviews.empty()
                 ? ds.reviews.front().phi.dim()
                 : cfg.dim;
    ds.split = split_dataset(ds.reviews.size(), derive_seed(cfg.seed, exp_detail::kSaltSplit));
    return ds;
}

namespace exp_detail {

inline const std::vector<std::size_t>& split_of(const Dataset& ds, Phase p) {
    switch (p) {
        case Phase::dev: return ds.split.dev;
        case Phase::train: return ds.split.train;
        case Phase::test: return ds.split.test;
    }
    return ds.split.train;
}

inline std::size_t rounds_for(const Dataset& ds, const ExperimentConfig& cfg, Phase p) {
    const std::size_t configured = p == Phase::dev     ? cfg.dev_rounds
                                   : p == Phase::train ? cfg.train_rounds
                                                       : cfg.test_rounds;
    if (configured != 0) return configured;
    if (ds.is_synth_vec) return p == Phase::train ? 2000 : 500;
    return std::max<std::size_t>(1, split_of(ds, p).size() / cfg.k);
}

// Round generator for one phase of one repetition. Rounds are shared across
// algorithms (the seed depends only on config seed, phase and repetition),
// so per-trial comparisons are paired.
inline std::function<Round()> make_stream(const Dataset& ds, const ExperimentConfig& cfg,
                                          Phase p, int rep) {
    const std::uint64_t seed =
        derive_seed(cfg.seed, phase_salt(p), static_cast<std::uint64_t>(rep));
    if (ds.is_synth_vec) {
        SynthSpec spec = ds.synth;
        spec.seed = seed;
        auto env = std::make_shared<SynthEnv>(spec);
        return [env]() { return env->next(); };
    }
    auto stream = std::make_shared<ReviewRounds>(ds.reviews, split_of(ds, p), cfg.k, seed);
    return [stream]() { return stream->next().round; };
}

}  // namespace exp_detail

// --- single training / evaluation passes ------------------------------------

struct TrainStats {
    double mean_error = 0.0;
    std::size_t rounds = 0;
    std::size_t skips = 0;  // gnc query skips
    double skip_rate() const {
        return rounds == 0 ? 0.0 : static_cast<double>(skips) / static_cast<double>(rounds);
    }
};

// One online pass of a pair-selection policy over `rounds` rounds.
inline TrainStats train_policy_pass(LinearModel& model, PolicyKind policy,
                                    const std::function<Round()>& stream, std::size_t rounds,
                                    bool project, Rng& policy_rng, Rng& feedback_rng,
                                    TraceWriter* trace = nullptr) {
    TrainStats stats;
    ProjectionOptions proj;
    proj.enabled = project;
    for (std::size_t t = 1; t <= rounds; ++t) {
        const Round round = stream();
        model.project_for_round(round.items, proj);
        const auto dec = model.select_pair(round.items, policy, policy_rng);

        TraceRecord rec;
        rec.t = t;
        rec.m = dec.m;
        rec.n = dec.n;
        rec.queried = dec.queried;
        rec.instantaneous_regret = instantaneous_regret(round, dec.m, dec.n);
        rec.error = round_error(round, dec.m);

        if (dec.queried) {
            const int y = draw_feedback(round.rewards[dec.m], round.rewards[*dec.n], feedback_rng);
            rec.y = y;
            const auto up = model.update(round.items[dec.m], round.items[*dec.n], y);
            rec.eps_t = std::sqrt(2.0 * up.h * model.eta());
        } else {
            ++stats.skips;
        }

        stats.mean_error += rec.error;
        ++stats.rounds;
        if (trace) trace->write(rec);
    }
    if (stats.rounds > 0) stats.mean_error /= static_cast<double>(stats.rounds);
    return stats;
}

// One online pass of a single-pick baseline. The binary feedback tells the
// learner whether its pick had the maximal reward of the round.
template <typename Model>
inline TrainStats train_baseline_pass(Model& model, const std::function<Round()>& stream,
                                      std::size_t rounds, Rng& rng, TraceWriter* trace = nullptr) {
    TrainStats stats;
    for (std::size_t t = 1; t <= rounds; ++t) {
        const Round round = stream();
        const double best = *std::max_element(round.rewards.begin(), round.rewards.end());
        const auto picked =
            model.step(round.items, [&](std::size_t i) { return round.rewards[i] == best; }, rng);

        TraceRecord rec;
        rec.t = t;
        rec.m = picked;
        rec.instantaneous_regret = instantaneous_regret(round, picked, std::nullopt);
        rec.error = round_error(round, picked);
        stats.mean_error += rec.error;
        ++stats.rounds;
        if (trace) trace->write(rec);
    }
    if (stats.rounds > 0) stats.mean_error /= static_cast<double>(stats.rounds);
    return stats;
}

// Frozen-model evaluation: greedy first pick only, no exploration, no updates.
inline double evaluate_greedy(std::span<const double> weights,
                              const std::function<Round()>& stream, std::size_t rounds) {
    double total = 0.0;
    for (std::size_t t = 0; t < rounds; ++t) {
        const Round round = stream();
        std::size_t pick = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < round.items.size(); ++i) {
            const double s = dot(weights, round.items[i]);
            if (s > best) {
                best = s;
                pick = i;
            }
        }
        total += round_error(round, pick);
    }
    return rounds == 0 ? 0.0 : total / static_cast<double>(rounds);
}

// --- tuning -----------------------------------------------------------------

namespace exp_detail {

struct GridPoint {
    HyperParams params;
};

inline std::vector<GridPoint> grid_points(const ExperimentConfig& cfg, Algorithm algo) {
    std::vector<GridPoint> pts;
    if (pair_policy_of(algo)) {
        if (cfg.grid.eta.empty()) throw std::invalid_argument("tune_grid: empty eta grid");
        for (double e : cfg.grid.eta) pts.push_back({HyperParams{e, 0.1, 1.0}});
    } else if (algo == Algorithm::confidit) {
        if (cfg.grid.eta.empty() || cfg.grid.alpha.empty())
            throw std::invalid_argument("tune_grid: empty eta/alpha grid");
        for (double e : cfg.grid.eta)
            for (double a : cfg.grid.alpha) pts.push_back({HyperParams{e, 0.1, a}});
    } else {
        if (cfg.grid.gamma.empty()) throw std::invalid_argument("tune_grid: empty gamma grid");
        for (double g : cfg.grid.gamma) pts.push_back({HyperParams{1.0, g, 1.0}});
    }
    return pts;
}

// one dev pass at a given grid point, returning the mean online error
inline double dev_error_at(const Dataset& ds, const ExperimentConfig& cfg, Algorithm algo,
                           const HyperParams& params) {
    const std::size_t rounds = rounds_for(ds, cfg, Phase::dev);
    auto stream = make_stream(ds, cfg, Phase::dev, 0);
    const std::uint64_t algo_salt = static_cast<std::uint64_t>(algo);
    Rng policy_rng(derive_seed(cfg.seed, kSaltTune, algo_salt, 1));
    Rng feedback_rng(derive_seed(cfg.seed, kSaltTune, algo_salt, 2));

    if (const auto policy = pair_policy_of(algo)) {
        LinearModel model(ds.dim, cfg.matrix, params.eta);
        return train_policy_pass(model, *policy, stream, rounds, cfg.project, policy_rng,
                                 feedback_rng)
            .mean_error;
    }
    if (algo == Algorithm::confidit) {
        ConfiditModel model(ds.dim, cfg.matrix, params.eta, params.alpha);
        return train_baseline_pass(model, stream, rounds, feedback_rng).mean_error;
    }
    BanditronModel model(ds.dim, params.gamma);
    return train_baseline_pass(model, stream, rounds, feedback_rng).mean_error;
}

}  // namespace exp_detail

// Grid search on the dev split: one training pass per point, pick the point
// with the lowest mean dev error (earliest point wins ties).
inline HyperParams tune_grid(const Dataset& ds, const ExperimentConfig& cfg, Algorithm algo) {
    const auto pts = exp_detail::grid_points(cfg, algo);
    HyperParams best = pts.front().params;
    double best_err = std::numeric_limits<double>::infinity();
    for (const auto& pt : pts) {
        const double err = exp_detail::dev_error_at(ds, cfg, algo, pt.params);
        if (err < best_err) {
            best_err = err;
            best = pt.params;
        }
    }
    return best;
}

// --- experiment pipeline ------------------------------------------------------

struct TrialResult {
    int rep = 0;
    std::uint64_t seed = 0;
    double test_error = 0.0;
    double skip_rate = 0.0;
};

struct AlgoSummary {
    Algorithm algo = Algorithm::ttg;
    HyperParams params;
    double mean_error = 0.0;
    double p95_low = 0.0;
    double p95_high = 0.0;
    double skip_rate = 0.0;
    std::vector<TrialResult> trials;
};

struct ExperimentResult {
    std::size_t k = 0;
    std::vector<AlgoSummary> algos;
};

inline double percentile(std::vector<double> xs, double p) {
    if (xs.empty()) throw std::invalid_argument("percentile: empty sample");
    std::sort(xs.begin(), xs.end());
    const double rank = p / 100.0 * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

// Win-count matrix over aligned trials: entry (i, j) counts trials where
// algorithm i had strictly lower error than algorithm j.
inline std::vector<std::vector<int>> one_vs_one_matrix(
    std::span<const std::vector<double>> per_algo_errors) {
    if (per_algo_errors.size() < 2)
        throw std::invalid_argument("one_vs_one_matrix: need at least two algorithms");
    const std::size_t trials = per_algo_errors.front().size();
    for (const auto& v : per_algo_errors)
        if (v.size() != trials) throw std::invalid_argument("one_vs_one_matrix: misaligned trials");

    std::vector<std::vector<int>> m(per_algo_errors.size(),
                                    std::vector<int>(per_algo_errors.size(), 0));
    for (std::size_t i = 0; i < per_algo_errors.size(); ++i)
        for (std::size_t j = 0; j < per_algo_errors.size(); ++j) {
            if (i == j) continue;
            for (std::size_t t = 0; t < trials; ++t)
                if (per_algo_errors[i][t] < per_algo_errors[j][t]) ++m[i][j];
        }
    return m;
}

namespace exp_detail {

inline TrialResult run_trial(const Dataset& ds, const ExperimentConfig& cfg, Algorithm algo,
                             const HyperParams& params, int rep) {
    const std::size_t train_rounds = rounds_for(ds, cfg, Phase::train);
    const std::size_t test_rounds = rounds_for(ds, cfg, Phase::test);
    const std::uint64_t algo_salt = static_cast<std::uint64_t>(algo);

    auto train_stream = make_stream(ds, cfg, Phase::train, rep);
    auto test_stream = make_stream(ds, cfg, Phase::test, rep);
    Rng policy_rng(derive_seed(cfg.seed, kSaltPolicy, algo_salt, static_cast<std::uint64_t>(rep)));
    Rng feedback_rng(
        derive_seed(cfg.seed, kSaltFeedback, algo_salt, static_cast<std::uint64_t>(rep)));

    std::unique_ptr<std::ofstream> trace_file;
    std::unique_ptr<TraceWriter> trace;
    if (!cfg.out_dir.empty() && cfg.write_traces) {
        const auto path = std::filesystem::path(cfg.out_dir) /
                          ("trace_" + std::string(algorithm_name(algo)) + "_rep" +
                           std::to_string(rep) + ".csv");
        trace_file = std::make_unique<std::ofstream>(path);
        if (!*trace_file) throw std::runtime_error("cannot write trace file: " + path.string());
        trace = std::make_unique<TraceWriter>(*trace_file, algorithm_name(algo));
    }

    TrialResult trial;
    trial.rep = rep;
    trial.seed = derive_seed(cfg.seed, kSaltTrain, static_cast<std::uint64_t>(rep));

    if (const auto policy = pair_policy_of(algo)) {
        LinearModel model(ds.dim, cfg.matrix, params.eta);
        const auto stats = train_policy_pass(model, *policy, train_stream, train_rounds,
                                             cfg.project, policy_rng, feedback_rng, trace.get());
        trial.skip_rate = algo == Algorithm::gnc ? stats.skip_rate() : 0.0;
        trial.test_error = evaluate_greedy(model.weights(), test_stream, test_rounds);
    } else if (algo == Algorithm::confidit) {
        ConfiditModel model(ds.dim, cfg.matrix, params.eta, params.alpha);
        train_baseline_pass(model, train_stream, train_rounds, feedback_rng, trace.get());
        trial.test_error = evaluate_greedy(model.weights(), test_stream, test_rounds);
    } else {
        BanditronModel model(ds.dim, params.gamma);
        train_baseline_pass(model, train_stream, train_rounds, feedback_rng, trace.get());
        trial.test_error = evaluate_greedy(model.weights(), test_stream, test_rounds);
    }
    return trial;
}

inline void write_summary_csv(const ExperimentResult& result, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write summary: " + path);
    os << "algorithm,K,mean_error,p95_low,p95_high,skip_rate\n";
    for (const auto& a : result.algos)
        os << algorithm_name(a.algo) << ',' << result.k << ',' << format_double(a.mean_error)
           << ',' << format_double(a.p95_low) << ',' << format_double(a.p95_high) << ','
           << format_double(a.skip_rate) << '\n';
}

inline void write_trials_csv(const ExperimentResult& result, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write trials: " + path);
    os << "algorithm,rep,seed,test_error,skip_rate\n";
    for (const auto& a : result.algos)
        for (const auto& t : a.trials)
            os << algorithm_name(a.algo) << ',' << t.rep << ',' << t.seed << ','
               << format_double(t.test_error) << ',' << format_double(t.skip_rate) << '\n';
}

inline void write_win_matrix_csv(const std::vector<std::string>& names,
                                 const std::vector<std::vector<int>>& m,
                                 const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write win matrix: " + path);
    os << "algorithm";
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    for (std::size_t i = 0; i < names.size(); ++i) {
        os << names[i];
        for (std::size_t j = 0; j < names.size(); ++j) os << ',' << m[i][j];
        os << '\n';
    }
}

}  // namespace exp_detail

// Full protocol: per algorithm, tune on dev, train one pass per repetition,
// evaluate the frozen model greedily on test, aggregate mean and the 95%
// band over repetitions. Repetitions run in parallel workers; results merge
// in repetition order so outputs are deterministic.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& ds) {
    if (cfg.repetitions < 1) throw std::invalid_argument("run_experiment: repetitions >= 1");
    if (cfg.algorithms.empty()) throw std::invalid_argument("run_experiment: no algorithms");

    if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);

    ExperimentResult result;
    result.k = cfg.k;

    for (const Algorithm algo : cfg.algorithms) {
        AlgoSummary summary;
        summary.algo = algo;
        summary.params = tune_grid(ds, cfg, algo);

        std::vector<std::future<TrialResult>> futures;
        futures.reserve(cfg.repetitions);
        for (int rep = 0; rep < cfg.repetitions; ++rep)
            futures.push_back(std::async(std::launch::async, [&, rep] {
                return exp_detail::run_trial(ds, cfg, algo, summary.params, rep);
            }));
        for (auto& f : futures) summary.trials.push_back(f.get());

        std::vector<double> errors;
        for (const auto& t : summary.trials) {
            errors.push_back(t.test_error);
            summary.mean_error += t.test_error;
            summary.skip_rate += t.skip_rate;
        }
        summary.mean_error /= static_cast<double>(summary.trials.size());
        summary.skip_rate /= static_cast<double>(summary.trials.size());
        summary.p95_low = percentile(errors, 2.5);
        summary.p95_high = percentile(errors, 97.5);
        result.algos.push_back(std::move(summary));
    }

    if (!cfg.out_dir.empty()) {
        const std::filesystem::path dir(cfg.out_dir);
        exp_detail::write_summary_csv(result, (dir / "summary.csv").string());
        exp_detail::write_trials_csv(result, (dir / "trials.csv").string());
        if (result.algos.size() >= 2) {
            std::vector<std::string> names;
            std::vector<std::vector<double>> errors;
            for (const auto& a : result.algos) {
                names.push_back(algorithm_name(a.algo));
                errors.emplace_back();
                for (const auto& t : a.trials) errors.back().push_back(t.test_error);
            }
            exp_detail::write_win_matrix_csv(names, one_vs_one_matrix(errors),
                                             (dir / "win_matrix.csv").string());
        }
    }
    return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const Dataset ds = load_dataset(cfg);
    return run_experiment(cfg, ds);
}

// --- online diagnostics driver ----------------------------------------------

// Online run of a pair-selection policy on a synthetic environment, with
// either a constant η or the analysis schedule η_t (which needs the
// environment's ground truth u). Produces the full per-round trace.
struct OnlineRunConfig {
    PolicyKind policy = PolicyKind::gnc;
    MatrixKind kind = MatrixKind::full;
    bool theoretical_eta = false;
    double eta = 1.0;    // constant-η mode
    double delta = 0.1;  // theoretical mode
    bool project = false;
    std::uint64_t seed = 0;
};

struct OnlineRunResult {
    std::vector<TraceRecord> trace;
    std::size_t skips = 0;
    double cum_regret = 0.0;
};

inline OnlineRunResult run_conquer_online(SynthEnv& env, std::uint64_t horizon,
                                          const OnlineRunConfig& rc) {
    LinearModel model(env.spec().dim, rc.kind, rc.theoretical_eta ? 1.0 : rc.eta);
    Rng policy_rng(derive_seed(rc.seed, 0x90));
    Rng feedback_rng(derive_seed(rc.seed, 0xfee));
    const double d0 = bregman_d0(env.spec().u);

    ProjectionOptions proj;
    proj.enabled = rc.project;

    OnlineRunResult out;
    out.trace.reserve(horizon);
    double q_sum = 0.0, h_sum = 0.0;

    for (std::uint64_t t = 1; t <= horizon; ++t) {
        const Round round = env.next();
        const double q_t = approx_error_q(round, env.spec().u);
        if (rc.theoretical_eta) {
            q_sum += q_t;
            model.set_eta(theoretical_eta_from_sums(t, d0, q_sum, h_sum, rc.delta));
        }

        model.project_for_round(round.items, proj);
        const auto dec = model.select_pair(round.items, rc.policy, policy_rng);

        TraceRecord rec;
        rec.t = t;
        rec.m = dec.m;
        rec.n = dec.n;
        rec.queried = dec.queried;
        rec.q_t = q_t;
        rec.instantaneous_regret = instantaneous_regret(round, dec.m, dec.n);
        rec.error = round_error(round, dec.m);

        if (dec.queried) {
            const int y = draw_feedback(round.rewards[dec.m], round.rewards[*dec.n], feedback_rng);
            rec.y = y;
            const auto up = model.update(round.items[dec.m], round.items[*dec.n], y);
            rec.eps_t = std::sqrt(2.0 * up.h * model.eta());
            h_sum += up.h;
        } else {
            ++out.skips;
        }

        out.cum_regret += rec.instantaneous_regret;
        out.trace.push_back(rec);
    }
    return out;
}

}  // namespace conquer
