#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "conquer/environment.hpp"
#include "conquer/linear_model.hpp"
#include "conquer/rng.hpp"
#include "conquer/sparse_vec.hpp"

namespace conquer {

// A sentence for parsing: node 0 is an artificial root, words are 1..W.
// Every ordered pair (head i, dependent j), i ≠ j, j ≥ 1, carries a unit-norm
// edge feature vector φ(i, j).
class Sentence {
public:
    Sentence(std::size_t num_words, std::uint32_t feat_dim)
        : num_words_(num_words), feat_dim_(feat_dim),
          feats_(num_nodes() * num_nodes()) {
        if (num_words_ < 1) throw std::invalid_argument("Sentence: need at least one word");
        if (feat_dim_ == 0) throw std::invalid_argument("Sentence: feature dim must be positive");
    }

    std::size_t num_words() const { return num_words_; }
    std::size_t num_nodes() const { return num_words_ + 1; }
    std::uint32_t feat_dim() const { return feat_dim_; }

    void set_edge_feature(std::size_t head, std::size_t dep, SparseVec phi) {
        check_edge(head, dep);
        if (phi.dim() != feat_dim_)
            throw std::invalid_argument("Sentence: feature dim mismatch");
        if (std::fabs(phi.norm() - 1.0) > 1e-6)
            throw std::invalid_argument("Sentence: edge feature must be unit norm");
        feats_[head * num_nodes() + dep] = std::move(phi);
        set_[head * num_nodes() + dep] = true;
    }

    const SparseVec& edge_feature(std::size_t head, std::size_t dep) const {
        check_edge(head, dep);
        if (!set_[head * num_nodes() + dep])
            throw std::invalid_argument("Sentence: edge feature not set");
        return feats_[head * num_nodes() + dep];
    }

    void set_gold_parents(std::vector<std::size_t> parents);
    bool has_gold() const { return !gold_.empty(); }
    const std::vector<std::size_t>& gold_parents() const {
        if (gold_.empty()) throw std::invalid_argument("Sentence: no gold parents");
        return gold_;
    }

    std::vector<const SparseVec*> all_edge_features() const {
        std::vector<const SparseVec*> out;
        for (std::size_t i = 0; i < num_nodes(); ++i)
            for (std::size_t j = 1; j < num_nodes(); ++j)
                if (i != j && set_[i * num_nodes() + j]) out.push_back(&feats_[i * num_nodes() + j]);
        return out;
    }

private:
    void check_edge(std::size_t head, std::size_t dep) const {
        if (dep == 0 || dep >= num_nodes() || head >= num_nodes() || head == dep)
            throw std::invalid_argument("Sentence: bad edge indices");
    }

    std::size_t num_words_;
    std::uint32_t feat_dim_;
    std::vector<SparseVec> feats_;
    std::vector<bool> set_ = std::vector<bool>(num_nodes() * num_nodes(), false);
    std::vector<std::size_t> gold_;
};

// parents[j] is the head of word j; parents[0] is unused and fixed to 0.
struct ParseTree {
    std::vector<std::size_t> parents;
};

inline bool is_arborescence(const ParseTree& tree, std::size_t num_nodes) {
    if (tree.parents.size() != num_nodes || num_nodes < 2) return false;
    for (std::size_t j = 1; j < num_nodes; ++j)
        if (tree.parents[j] >= num_nodes || tree.parents[j] == j) return false;
    for (std::size_t j = 1; j < num_nodes; ++j) {
        std::size_t cur = j, steps = 0;
        while (cur != 0) {
            cur = tree.parents[cur];
            if (++steps > num_nodes) return false;  // cycle
        }
    }
    return true;
}

inline void Sentence::set_gold_parents(std::vector<std::size_t> parents) {
    if (!is_arborescence(ParseTree{parents}, num_nodes()))
        throw std::invalid_argument("Sentence: gold parents are not an arborescence");
    gold_ = std::move(parents);
}

// Φ(x, m) = (1/(s_t − 1)) Σ_{(i,j)∈m} φ(x, i, j); the factor is one over the
// edge count, so the result has norm at most 1 (exactly 1 only when the edge
// features happen to be aligned).
inline SparseVec aggregate_features(const Sentence& s, const ParseTree& tree) {
    if (!is_arborescence(tree, s.num_nodes()))
        throw std::invalid_argument("aggregate_features: invalid tree");
    std::vector<const SparseVec*> edges;
    edges.reserve(s.num_words());
    for (std::size_t j = 1; j < s.num_nodes(); ++j)
        edges.push_back(&s.edge_feature(tree.parents[j], j));
    return sum_scaled(edges, 1.0 / static_cast<double>(s.num_words()));
}

// Edge score matrix under a weight vector; scores[i][j] = w·φ(i, j), with
// −inf on the diagonal and into the root.
inline std::vector<std::vector<double>> edge_scores(const Sentence& s,
                                                    std::span<const double> w) {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> scores(s.num_nodes(),
                                            std::vector<double>(s.num_nodes(), neg_inf));
    for (std::size_t i = 0; i < s.num_nodes(); ++i)
        for (std::size_t j = 1; j < s.num_nodes(); ++j)
            if (i != j) scores[i][j] = dot(w, s.edge_feature(i, j));
    return scores;
}

inline double tree_score(const std::vector<std::vector<double>>& weights,
                         const ParseTree& tree) {
    double s = 0.0;
    for (std::size_t j = 1; j < tree.parents.size(); ++j) s += weights[tree.parents[j]][j];
    return s;
}

namespace cle_detail {

// One contraction level of Chu-Liu/Edmonds. weights[i][j] = score of i→j,
// node 0 is the root, −inf marks an absent edge.
inline std::vector<std::size_t> solve(const std::vector<std::vector<double>>& w) {
    const std::size_t n = w.size();
    const double neg_inf = -std::numeric_limits<double>::infinity();

    std::vector<std::size_t> best_in(n, 0);
    for (std::size_t j = 1; j < n; ++j) {
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j || w[i][j] == neg_inf) continue;
            if (best == n || w[i][j] > w[best][j]) best = i;
        }
        if (best == n) throw std::invalid_argument("cle: node has no incoming edge");
        best_in[j] = best;
    }

    // cycle detection on the functional graph j → best_in[j]
    std::vector<int> state(n, 0);
    state[0] = 2;
    std::vector<std::size_t> cycle;
    for (std::size_t start = 1; start < n && cycle.empty(); ++start) {
        if (state[start] != 0) continue;
        std::vector<std::size_t> path;
        std::size_t cur = start;
        while (state[cur] == 0) {
            state[cur] = 1;
            path.push_back(cur);
            cur = best_in[cur];
        }
        if (state[cur] == 1) {
            const auto it = std::find(path.begin(), path.end(), cur);
            cycle.assign(it, path.end());
        }
        for (std::size_t v : path) state[v] = 2;
    }

    if (cycle.empty()) {
        best_in[0] = 0;
        return best_in;
    }

    std::vector<bool> in_cycle(n, false);
    for (std::size_t v : cycle) in_cycle[v] = true;

    // contracted ids: outside nodes keep their order, the cycle becomes the
    // last node c
    std::vector<std::size_t> new_id(n, 0);
    std::size_t next = 0;
    for (std::size_t v = 0; v < n; ++v)
        if (!in_cycle[v]) new_id[v] = next++;
    const std::size_t c = next;
    const std::size_t n2 = next + 1;
    std::vector<std::size_t> old_id(next);
    for (std::size_t v = 0; v < n; ++v)
        if (!in_cycle[v]) old_id[new_id[v]] = v;

    std::vector<std::vector<double>> w2(n2, std::vector<double>(n2, neg_inf));
    std::vector<std::pair<std::size_t, std::size_t>> enter_arg(n2, {n, n});
    std::vector<std::size_t> leave_arg(n2, n);

    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 1; v < n; ++v) {
            if (u == v || w[u][v] == neg_inf) continue;
            if (!in_cycle[u] && !in_cycle[v]) {
                w2[new_id[u]][new_id[v]] = w[u][v];
            } else if (!in_cycle[u] && in_cycle[v]) {
                const double cand = w[u][v] - w[best_in[v]][v];
                if (cand > w2[new_id[u]][c]) {
                    w2[new_id[u]][c] = cand;
                    enter_arg[new_id[u]] = {u, v};
                }
            } else if (in_cycle[u] && !in_cycle[v]) {
                if (w[u][v] > w2[c][new_id[v]]) {
                    w2[c][new_id[v]] = w[u][v];
                    leave_arg[new_id[v]] = u;
                }
            }
        }
    }

    const auto sub = solve(w2);

    std::vector<std::size_t> parents(n, 0);
    for (std::size_t v2 = 1; v2 < n2; ++v2) {
        if (v2 == c) continue;
        const std::size_t v = old_id[v2];
        parents[v] = sub[v2] == c ? leave_arg[v2] : old_id[sub[v2]];
    }
    // edge entering the cycle breaks exactly one cycle edge
    const auto [ent_u, ent_v] = enter_arg[sub[c]];
    for (std::size_t v : cycle) parents[v] = best_in[v];
    parents[ent_v] = ent_u;
    return parents;
}

}  // namespace cle_detail

// Maximum-total-weight spanning arborescence rooted at node 0.
inline ParseTree cle_max_arborescence(const std::vector<std::vector<double>>& weights) {
    if (weights.size() < 2) throw std::invalid_argument("cle: need at least two nodes");
    for (const auto& row : weights)
        if (row.size() != weights.size()) throw std::invalid_argument("cle: ragged matrix");
    return ParseTree{cle_detail::solve(weights)};
}

inline ParseTree cle_max_arborescence(const Sentence& s, std::span<const double> w) {
    return cle_max_arborescence(edge_scores(s, w));
}

// ε(i, j, k) = √(η · (φ(i,j) − φ(k,j))ᵀ A⁻¹ (φ(i,j) − φ(k,j)))
inline double edge_confusion_eps(const LinearModel& model, const Sentence& s, std::size_t i,
                                 std::size_t j, std::size_t k) {
    if (i == k || i == j || k == j || j == 0 || i >= s.num_nodes() || k >= s.num_nodes() ||
        j >= s.num_nodes())
        throw std::invalid_argument("edge_confusion_eps: bad indices");
    return model.confusion_eps(s.edge_feature(i, j), s.edge_feature(k, j));
}

inline double edge_accuracy(const ParseTree& tree, std::span<const std::size_t> gold) {
    if (tree.parents.size() != gold.size() || gold.size() < 2)
        throw std::invalid_argument("edge_accuracy: size mismatch");
    std::size_t hits = 0;
    for (std::size_t j = 1; j < gold.size(); ++j)
        if (tree.parents[j] == gold[j]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(gold.size() - 1);
}

// y = +1 if the kept edge matches gold and the alternative does not, −1 in
// the reverse case, uniform ±1 when neither matches.
inline int simulated_annotator(std::size_t dep, std::size_t head_m, std::size_t head_n,
                               std::span<const std::size_t> gold, Rng& rng) {
    const bool match_m = gold[dep] == head_m;
    const bool match_n = gold[dep] == head_n;
    if (match_m && !match_n) return +1;
    if (match_n && !match_m) return -1;
    return rng.bernoulli(0.5) ? +1 : -1;
}

using EdgeFeedback = std::function<int(std::size_t dep, std::size_t head_m, std::size_t head_n)>;

struct DpStepResult {
    ParseTree m_tree;
    ParseTree n_tree;
    std::size_t query_dep = 0;   // j*
    std::size_t kept_head = 0;   // π_m(j*)
    std::size_t alt_head = 0;    // i*
    int y = 0;
    double h = 0.0;
};

// One round of the parsing learner: decode the best tree, find the
// confusion-maximal single-edge alternative, query, and apply the
// second-order update on the aggregated tree features. The alternative tree
// differs from the decoded one in exactly one parent; candidates whose swap
// would create a cycle are skipped in favor of the next-highest confusion.
inline DpStepResult dp_step(LinearModel& model, const Sentence& s, const EdgeFeedback& feedback,
                            const ProjectionOptions& proj = {}) {
    if (s.num_words() < 2)
        throw std::invalid_argument("dp_step: need at least two words to pose a query");

    if (proj.enabled) {
        const auto ptrs = s.all_edge_features();
        std::vector<SparseVec> items;
        items.reserve(ptrs.size());
        for (const auto* p : ptrs) items.push_back(*p);
        model.project_for_round(items, proj);
    }

    DpStepResult res;
    res.m_tree = cle_max_arborescence(s, model.w_tilde());

    // β(i, j) = ε(π_m(j), j, i) over all dependents j and alternative heads i
    struct Cand {
        double beta;
        std::size_t j, i;
    };
    std::vector<Cand> cands;
    for (std::size_t j = 1; j < s.num_nodes(); ++j) {
        const std::size_t k = res.m_tree.parents[j];
        for (std::size_t i = 0; i < s.num_nodes(); ++i) {
            if (i == j || i == k) continue;
            cands.push_back({edge_confusion_eps(model, s, k, j, i), j, i});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.beta != b.beta) return a.beta > b.beta;
        return std::tie(a.j, a.i) < std::tie(b.j, b.i);
    });

    bool found = false;
    for (const auto& cand : cands) {
        ParseTree alt = res.m_tree;
        alt.parents[cand.j] = cand.i;
        if (!is_arborescence(alt, s.num_nodes())) continue;
        res.n_tree = std::move(alt);
        res.query_dep = cand.j;
        res.kept_head = res.m_tree.parents[cand.j];
        res.alt_head = cand.i;
        found = true;
        break;
    }
    if (!found) throw std::runtime_error("dp_step: no valid single-edge alternative");

    res.y = feedback(res.query_dep, res.kept_head, res.alt_head);
    if (res.y != 1 && res.y != -1) throw std::invalid_argument("dp_step: feedback must be ±1");

    const SparseVec phi_m = aggregate_features(s, res.m_tree);
    const SparseVec phi_n = aggregate_features(s, res.n_tree);
    res.h = model.update(phi_m, phi_n, res.y).h;
    return res;
}

// --- synthetic parse environment -------------------------------------------

struct ParseEnvSpec {
    std::size_t num_words = 5;
    std::uint32_t dim = 24;
    double u_norm = 0.9;
    std::uint64_t seed = 0;
};

// Random unit edge features with gold trees decoded from a hidden vector, so
// annotator feedback carries a learnable linear signal.
class SynthParseEnv {
public:
    explicit SynthParseEnv(ParseEnvSpec spec)
        : spec_(spec), u_(random_direction(spec.dim, derive_seed(spec.seed, 0x601d), spec.u_norm)),
          rng_(derive_seed(spec.seed, 0xed6e)) {}

    const std::vector<double>& u() const { return u_; }
    const ParseEnvSpec& spec() const { return spec_; }

    Sentence next() {
        Sentence s(spec_.num_words, spec_.dim);
        for (std::size_t i = 0; i < s.num_nodes(); ++i) {
            for (std::size_t j = 1; j < s.num_nodes(); ++j) {
                if (i == j) continue;
                std::vector<double> v(spec_.dim);
                double nrm = 0.0;
                for (auto& x : v) {
                    x = rng_.normal();
                    nrm += x * x;
                }
                nrm = std::sqrt(nrm);
                for (auto& x : v) x /= nrm;
                s.set_edge_feature(i, j, SparseVec::from_dense(v));
            }
        }
        s.set_gold_parents(cle_max_arborescence(s, u_).parents);
        return s;
    }

private:
    ParseEnvSpec spec_;
    std::vector<double> u_;
    Rng rng_;
};

// --- CoNLL-like input -------------------------------------------------------

struct ConllSentence {
    std::vector<std::string> forms;        // forms[0] is the artificial root
    std::vector<std::size_t> gold_heads;   // gold_heads[j] for words j ≥ 1
};

// One token per line: index form gold-head (whitespace separated), blank line
// between sentences.
inline std::vector<ConllSentence> load_conll(std::istream& is, const std::string& name) {
    std::vector<ConllSentence> out;
    ConllSentence cur;
    cur.forms.assign(1, "<root>");
    cur.gold_heads.assign(1, 0);
    std::string line;
    std::size_t lineno = 0;

    const auto flush = [&]() {
        if (cur.forms.size() > 1) {
            if (!is_arborescence(ParseTree{cur.gold_heads}, cur.forms.size()))
                throw std::runtime_error(name + ": gold heads do not form a tree near line " +
                                         std::to_string(lineno));
            out.push_back(std::move(cur));
        }
        cur = ConllSentence{};
        cur.forms.assign(1, "<root>");
        cur.gold_heads.assign(1, 0);
    };

    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            flush();
            continue;
        }
        std::istringstream ls(line);
        std::size_t idx = 0, head = 0;
        std::string form;
        if (!(ls >> idx >> form >> head))
            throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                     ": expected 'index form head'");
        if (idx != cur.forms.size())
            throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                     ": token indices must be 1,2,...");
        cur.forms.push_back(std::move(form));
        cur.gold_heads.push_back(head);
    }
    flush();
    return out;
}

inline std::vector<ConllSentence> load_conll(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open sentence file: " + path);
    return load_conll(is, path);
}

namespace text_templates {

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace text_templates

// Hashed edge-feature templates over word pairs: head form, dependent form,
// the pair, attachment direction, and a capped distance bucket. Each edge
// vector is unit-normalized.
inline Sentence build_sentence_features(const ConllSentence& cs, std::uint32_t dim) {
    if (cs.forms.size() < 2) throw std::invalid_argument("build_sentence_features: empty sentence");
    if ((dim & (dim - 1)) != 0 || dim < (1u << 10))
        throw std::invalid_argument("build_sentence_features: dim must be a power of two >= 2^10");

    Sentence s(cs.forms.size() - 1, dim);
    for (std::size_t i = 0; i < cs.forms.size(); ++i) {
        for (std::size_t j = 1; j < cs.forms.size(); ++j) {
            if (i == j) continue;
            const long dist = static_cast<long>(j) - static_cast<long>(i);
            const long capped = std::clamp(dist, -5l, 5l);
            const std::string dir = dist > 0 ? "R" : "L";
            const std::vector<std::string> templates{
                "H=" + cs.forms[i],
                "D=" + cs.forms[j],
                "HD=" + cs.forms[i] + "|" + cs.forms[j],
                "DIR=" + dir,
                "DIST=" + std::to_string(capped),
                "HDIR=" + cs.forms[i] + "|" + dir,
            };
            std::vector<SparseVec::Entry> entries;
            for (const auto& t : templates) {
                const std::uint64_t h = text_templates::fnv1a(t);
                entries.emplace_back(static_cast<std::uint32_t>(h & (dim - 1)),
                                     ((h >> 32) & 1u) ? 1.0 : -1.0);
            }
            auto phi = SparseVec::from_unsorted(dim, std::move(entries));
            s.set_edge_feature(i, j, phi.normalized());
        }
    }
    if (cs.gold_heads.size() == cs.forms.size()) s.set_gold_parents(cs.gold_heads);
    return s;
}

}  // namespace conquer
