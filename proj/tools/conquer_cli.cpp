// Command-line driver: grid tuning, full experiment runs, report
// aggregation, corpus featurization, and a dependency-parsing demo.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "conquer/checkpoint.hpp"
#include "conquer/depparse.hpp"
#include "conquer/experiment.hpp"

using nlohmann::json;
using namespace conquer;

namespace {

MatrixKind parse_matrix(const std::string& s) {
    if (s == "full") return MatrixKind::full;
    if (s == "diag") return MatrixKind::diagonal;
    throw CLI::ValidationError("--matrix must be 'full' or 'diag'");
}

std::vector<Algorithm> parse_algorithms(const std::vector<std::string>& names) {
    std::vector<Algorithm> out;
    for (const auto& n : names) {
        const auto a = algorithm_from_name(n);
        if (!a) throw CLI::ValidationError("unknown algorithm: " + n);
        out.push_back(*a);
    }
    return out;
}

ExperimentConfig config_from_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    const json j = json::parse(is);

    ExperimentConfig cfg;
    if (j.contains("algorithms")) {
        std::vector<std::string> names = j["algorithms"];
        cfg.algorithms = parse_algorithms(names);
    }
    cfg.k = j.value("k", cfg.k);
    cfg.dim = j.value("dim", cfg.dim);
    if (j.contains("matrix")) cfg.matrix = parse_matrix(j["matrix"]);
    if (j.contains("eta_grid")) cfg.grid.eta = j["eta_grid"].get<std::vector<double>>();
    if (j.contains("gamma_grid")) cfg.grid.gamma = j["gamma_grid"].get<std::vector<double>>();
    if (j.contains("alpha_grid")) cfg.grid.alpha = j["alpha_grid"].get<std::vector<double>>();
    cfg.delta = j.value("delta", cfg.delta);
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.project = j.value("project", cfg.project);
    cfg.train_rounds = j.value("train_rounds", cfg.train_rounds);
    cfg.dev_rounds = j.value("dev_rounds", cfg.dev_rounds);
    cfg.test_rounds = j.value("test_rounds", cfg.test_rounds);
    cfg.out_dir = j.value("out", cfg.out_dir);
    cfg.write_traces = j.value("write_traces", cfg.write_traces);

    if (j.contains("data")) {
        const json& d = j["data"];
        const std::string type = d.value("type", "synth-text");
        if (type == "synth-text") {
            cfg.data.type = DataConfig::Type::synth_text;
            cfg.data.synth_reviews = d.value("reviews", cfg.data.synth_reviews);
        } else if (type == "tsv") {
            cfg.data.type = DataConfig::Type::tsv;
            cfg.data.path = d.at("path");
        } else if (type == "svm") {
            cfg.data.type = DataConfig::Type::svm;
            cfg.data.path = d.at("path");
        } else if (type == "synth-vec") {
            cfg.data.type = DataConfig::Type::synth_vec;
            cfg.data.vec_dim = d.value("dim", cfg.data.vec_dim);
            cfg.data.vec_noise = d.value("noise", cfg.data.vec_noise);
            cfg.data.u_seed = d.value("u_seed", cfg.data.u_seed);
            cfg.data.u_norm = d.value("u_norm", cfg.data.u_norm);
        } else {
            throw std::runtime_error("unknown data.type: " + type);
        }
    }
    return cfg;
}

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> algos;
    std::size_t k = 0;
    double eta = 0.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int reps = 0;
    std::string matrix;
    bool project = false;
    std::string out;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON experiment config");
    cmd->add_option("--algo", f.algos, "algorithm(s): ttg gnr gnu gnc confidit banditron");
    cmd->add_option("--k", f.k, "items per round");
    cmd->add_option("--eta", f.eta, "fix the eta grid to a single value");
    cmd->add_option("--seed", f.seed, "base seed")->each([&](const std::string&) {
        f.seed_set = true;
    });
    cmd->add_option("--reps", f.reps, "repetitions");
    cmd->add_option("--matrix", f.matrix, "confidence matrix kind: full|diag");
    cmd->add_flag("--project", f.project, "enable the per-round projection");
    cmd->add_option("--out", f.out, "output directory");
}

// flags win over the config file
ExperimentConfig resolve_config(const CommonFlags& f) {
    ExperimentConfig cfg =
        f.config_path.empty() ? ExperimentConfig{} : config_from_json(f.config_path);
    if (!f.algos.empty()) cfg.algorithms = parse_algorithms(f.algos);
    if (f.k != 0) cfg.k = f.k;
    if (f.eta != 0.0) cfg.grid.eta = {f.eta};
    if (f.seed_set) cfg.seed = f.seed;
    if (f.reps != 0) cfg.repetitions = f.reps;
    if (!f.matrix.empty()) cfg.matrix = parse_matrix(f.matrix);
    if (f.project) cfg.project = true;
    if (!f.out.empty()) cfg.out_dir = f.out;
    return cfg;
}

int cmd_tune(const CommonFlags& flags) {
    const ExperimentConfig cfg = resolve_config(flags);
    const Dataset ds = load_dataset(cfg);
    std::cout << "algorithm,eta,gamma,alpha\n";
    for (const Algorithm algo : cfg.algorithms) {
        const auto p = tune_grid(ds, cfg, algo);
        std::cout << algorithm_name(algo) << ',' << format_double(p.eta) << ','
                  << format_double(p.gamma) << ',' << format_double(p.alpha) << '\n';
    }
    return 0;
}

int cmd_run(const CommonFlags& flags) {
    ExperimentConfig cfg = resolve_config(flags);
    if (cfg.out_dir.empty()) cfg.out_dir = "out";
    const auto result = run_experiment(cfg);
    std::cout << "algorithm,K,mean_error,p95_low,p95_high,skip_rate\n";
    for (const auto& a : result.algos)
        std::cout << algorithm_name(a.algo) << ',' << result.k << ','
                  << format_double(a.mean_error) << ',' << format_double(a.p95_low) << ','
                  << format_double(a.p95_high) << ',' << format_double(a.skip_rate) << '\n';
    std::cerr << "wrote " << cfg.out_dir << "/summary.csv, trials.csv"
              << (result.algos.size() >= 2 ? ", win_matrix.csv" : "") << '\n';
    return 0;
}

int cmd_report(const std::string& trials_path, std::string out_path) {
    std::ifstream is(trials_path);
    if (!is) throw std::runtime_error("cannot open trials file: " + trials_path);
    std::string line;
    if (!std::getline(is, line) || !line.starts_with("algorithm,rep,"))
        throw std::runtime_error(trials_path + ": not a trials.csv file");

    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> errors;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string algo, rep, seed, err, skip;
        std::getline(ls, algo, ',');
        std::getline(ls, rep, ',');
        std::getline(ls, seed, ',');
        std::getline(ls, err, ',');
        std::getline(ls, skip, ',');
        if (errors.find(algo) == errors.end()) order.push_back(algo);
        errors[algo].push_back(std::strtod(err.c_str(), nullptr));
    }
    if (order.size() < 2) throw std::runtime_error("report: need at least two algorithms");

    std::vector<std::vector<double>> aligned;
    for (const auto& name : order) aligned.push_back(errors[name]);
    const auto matrix = one_vs_one_matrix(aligned);

    if (out_path.empty()) out_path = "win_matrix.csv";
    exp_detail::write_win_matrix_csv(order, matrix, out_path);
    std::cout << "algorithm";
    for (const auto& n : order) std::cout << ',' << n;
    std::cout << '\n';
    for (std::size_t i = 0; i < order.size(); ++i) {
        std::cout << order[i];
        for (std::size_t j = 0; j < order.size(); ++j) std::cout << ',' << matrix[i][j];
        std::cout << '\n';
    }
    std::cerr << "wrote " << out_path << '\n';
    return 0;
}

int cmd_dump_features(const std::string& tsv, const std::string& svm, std::size_t synth_n,
                      std::uint32_t dim, std::uint64_t seed, const std::string& out) {
    std::vector<FeaturizedReview> feats;
    std::uint32_t out_dim = dim;
    if (!tsv.empty()) {
        feats = featurize_corpus(load_reviews_tsv(tsv), dim);
    } else if (!svm.empty()) {
        feats = load_featurized(svm);
        out_dim = feats.empty() ? dim : feats.front().phi.dim();
    } else {
        feats = featurize_corpus(synthetic_review_corpus(synth_n, seed), dim);
    }

    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot write: " + out);
    dump_featurized(feats, out_dim, os);
    std::cerr << "wrote " << feats.size() << " featurized reviews to " << out << '\n';
    return 0;
}

int cmd_parse_demo(const std::string& conll, std::size_t words, std::uint32_t dim,
                   std::size_t rounds, double eta, const std::string& matrix,
                   std::uint64_t seed, const std::string& model_out) {
    const MatrixKind kind = parse_matrix(matrix);
    Rng fb_rng(derive_seed(seed, 0xab));

    std::vector<Sentence> sentences;
    if (!conll.empty()) {
        const auto raw = load_conll(conll);
        if (raw.empty()) throw std::runtime_error("no sentences in " + conll);
        for (const auto& cs : raw)
            if (cs.forms.size() >= 3) sentences.push_back(build_sentence_features(cs, dim));
        if (sentences.empty())
            throw std::runtime_error("need sentences with at least two words");
    }
    SynthParseEnv env({.num_words = words, .dim = dim, .u_norm = 0.9, .seed = seed});

    const std::uint32_t feat_dim = sentences.empty() ? dim : sentences.front().feat_dim();
    LinearModel model(feat_dim, kind, eta);

    const std::size_t quarter = std::max<std::size_t>(1, rounds / 4);
    double acc_sum = 0.0;
    std::size_t acc_n = 0;
    std::optional<Sentence> synth_holder;
    std::cout << "rounds,edge_accuracy\n";
    for (std::size_t t = 1; t <= rounds; ++t) {
        if (sentences.empty()) synth_holder = env.next();
        const Sentence& s =
            sentences.empty() ? *synth_holder : sentences[(t - 1) % sentences.size()];
        const auto gold = s.gold_parents();
        const auto res = dp_step(model, s, [&](std::size_t dep, std::size_t hm, std::size_t hn) {
            return simulated_annotator(dep, hm, hn, gold, fb_rng);
        });
        acc_sum += edge_accuracy(res.m_tree, gold);
        ++acc_n;
        if (t % quarter == 0 || t == rounds) {
            std::cout << t << ',' << format_double(acc_sum / static_cast<double>(acc_n)) << '\n';
            acc_sum = 0.0;
            acc_n = 0;
        }
    }
    if (!model_out.empty()) {
        save_model(model, model_out);
        std::cerr << "saved model checkpoint to " << model_out << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contextual preference-feedback bandit simulator"};
    app.require_subcommand(1);

    CommonFlags tune_flags, run_flags;
    auto* tune = app.add_subcommand("tune", "grid-tune hyperparameters on the dev split");
    add_common_flags(tune, tune_flags);

    auto* run = app.add_subcommand("run", "tune, train and evaluate all configured algorithms");
    add_common_flags(run, run_flags);

    std::string trials_path, report_out;
    auto* report = app.add_subcommand("report", "build a one-vs-one win matrix from trials.csv");
    report->add_option("--trials", trials_path, "trials.csv produced by run")->required();
    report->add_option("--out", report_out, "output win matrix path");

    std::string df_tsv, df_svm, df_out;
    std::size_t df_synth = 2000;
    std::uint32_t df_dim = 1u << 16;
    std::uint64_t df_seed = 7;
    auto* dump = app.add_subcommand("dump-features", "featurize a corpus into the sparse format");
    dump->add_option("--tsv", df_tsv, "TSV corpus input");
    dump->add_option("--svm", df_svm, "pre-featurized input (re-dumped verbatim)");
    dump->add_option("--synth", df_synth, "synthetic corpus size (used when no file given)");
    dump->add_option("--dim", df_dim, "hash dimension (power of two)");
    dump->add_option("--seed", df_seed, "seed for the synthetic corpus");
    dump->add_option("--out", df_out, "output path")->required();

    std::string pd_conll, pd_matrix = "full", pd_model_out;
    std::size_t pd_words = 5, pd_rounds = 2000;
    std::uint32_t pd_dim = 24;
    double pd_eta = 1.0;
    std::uint64_t pd_seed = 7;
    auto* parse_demo = app.add_subcommand("parse-demo", "online dependency parsing with edge queries");
    parse_demo->add_option("--conll", pd_conll, "CoNLL-like input (index form head)");
    parse_demo->add_option("--words", pd_words, "synthetic sentence length");
    parse_demo->add_option("--dim", pd_dim, "edge feature dimension");
    parse_demo->add_option("--rounds", pd_rounds, "training rounds");
    parse_demo->add_option("--eta", pd_eta, "confidence scale");
    parse_demo->add_option("--matrix", pd_matrix, "full|diag");
    parse_demo->add_option("--seed", pd_seed, "seed");
    parse_demo->add_option("--save-model", pd_model_out, "write a model checkpoint here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (tune->parsed()) return cmd_tune(tune_flags);
        if (run->parsed()) return cmd_run(run_flags);
        if (report->parsed()) return cmd_report(trials_path, report_out);
        if (dump->parsed())
            return cmd_dump_features(df_tsv, df_svm, df_synth, df_dim, df_seed, df_out);
        if (parse_demo->parsed())
            return cmd_parse_demo(pd_conll, pd_words, pd_dim, pd_rounds, pd_eta, pd_matrix,
                                  pd_seed, pd_model_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
