#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "conquer/environment.hpp"
#include "conquer/rng.hpp"
#include "conquer/sparse_vec.hpp"

namespace conquer {

struct Review {
    int stars = 3;
    std::string text;
    std::string domain;
};

namespace text_detail {

// marker tokens spliced in place of non-word patterns
inline constexpr std::string_view kUrlMark = "__URL__";
inline constexpr std::string_view kDotsMark = "__DOTS__";
inline constexpr std::string_view kSmileMark = "__SMILE__";
inline constexpr std::string_view kFrownMark = "__FROWN__";

// matched against lowercased text, longest first
inline const std::vector<std::pair<std::string_view, std::string_view>>& emoticons() {
    static const std::vector<std::pair<std::string_view, std::string_view>> table{
        {":-)", kSmileMark}, {":-(", kFrownMark}, {":')", kSmileMark}, {":'(", kFrownMark},
        {":)", kSmileMark},  {":(", kFrownMark},  {";)", kSmileMark},  {":d", kSmileMark},
        {":p", kSmileMark},  {"=)", kSmileMark},  {"=(", kFrownMark},
    };
    return table;
}

// whole-token abbreviation expansions, applied after lowercasing
inline const std::map<std::string_view, std::string_view>& abbreviations() {
    static const std::map<std::string_view, std::string_view> table{
        {"don't", "do not"},       {"doesn't", "does not"},   {"didn't", "did not"},
        {"can't", "cannot"},       {"won't", "will not"},     {"isn't", "is not"},
        {"wasn't", "was not"},     {"aren't", "are not"},     {"couldn't", "could not"},
        {"wouldn't", "would not"}, {"shouldn't", "should not"}, {"i'm", "i am"},
        {"it's", "it is"},         {"i've", "i have"},        {"you've", "you have"},
        {"i'll", "i will"},        {"that's", "that is"},     {"there's", "there is"},
        {"they're", "they are"},   {"you're", "you are"},     {"we're", "we are"},
        {"w/", "with"},            {"b/c", "because"},
    };
    return table;
}

inline bool url_start(std::string_view s, std::size_t i) {
    return s.substr(i).starts_with("http://") || s.substr(i).starts_with("https://") ||
           s.substr(i).starts_with("www.");
}

}  // namespace text_detail

// Lowercase, strip HTML tags, splice marker tokens over URLs / emoticons /
// ellipses, and expand a small table of abbreviations. Markers keep their
// uppercase spelling so they never collide with corpus words.
inline std::string preprocess_text(std::string_view raw) {
    std::string s;
    s.reserve(raw.size());

    // strip tags, lowercase the rest
    bool in_tag = false;
    for (char c : raw) {
        if (c == '<') {
            in_tag = true;
            continue;
        }
        if (c == '>') {
            in_tag = false;
            continue;
        }
        if (!in_tag) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }

    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        if (text_detail::url_start(s, i)) {
            out += text_detail::kUrlMark;
            while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
            continue;
        }
        if (s[i] == '.' && i + 2 < s.size() && s[i + 1] == '.' && s[i + 2] == '.') {
            out += text_detail::kDotsMark;
            while (i < s.size() && s[i] == '.') ++i;
            continue;
        }
        bool matched = false;
        for (const auto& [pat, mark] : text_detail::emoticons()) {
            if (s.compare(i, pat.size(), pat) == 0) {
                out += mark;
                i += pat.size();
                matched = true;
                break;
            }
        }
        if (!matched) out.push_back(s[i++]);
    }

    // token-level abbreviation expansion
    std::string expanded;
    expanded.reserve(out.size());
    std::istringstream toks(out);
    std::string tok;
    bool first = true;
    while (toks >> tok) {
        if (!first) expanded.push_back(' ');
        first = false;
        const auto it = text_detail::abbreviations().find(tok);
        expanded += it != text_detail::abbreviations().end() ? it->second : std::string_view(tok);
    }
    return expanded;
}

namespace text_detail {

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace text_detail

// Signed feature hashing of unigrams and adjacent-token bigrams into a
// power-of-two bucket space, unit-normalized. The hash is a fixed FNV-1a so
// vectors are identical across runs and platforms.
inline SparseVec bigram_hash_features(std::string_view text, std::uint32_t dim) {
    if (dim < (1u << 10)) throw std::invalid_argument("bigram_hash_features: dim must be >= 2^10");
    if ((dim & (dim - 1)) != 0)
        throw std::invalid_argument("bigram_hash_features: dim must be a power of two");

    std::vector<std::string> tokens;
    {
        std::istringstream ss{std::string(text)};
        std::string tok;
        while (ss >> tok) tokens.push_back(std::move(tok));
    }
    if (tokens.empty()) throw std::invalid_argument("bigram_hash_features: empty token stream");

    std::map<std::uint32_t, double> acc;
    const auto add = [&](std::string_view key) {
        const std::uint64_t h = text_detail::fnv1a(key);
        const auto bucket = static_cast<std::uint32_t>(h & (dim - 1));
        const double sign = ((h >> 32) & 1u) ? 1.0 : -1.0;
        acc[bucket] += sign;
    };
    for (const auto& t : tokens) add(t);
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
        add(tokens[i] + '\x1e' + tokens[i + 1]);

    std::vector<SparseVec::Entry> entries;
    entries.reserve(acc.size());
    for (const auto& [idx, val] : acc)
        if (val != 0.0) entries.emplace_back(idx, val);
    if (entries.empty())
        throw std::invalid_argument("bigram_hash_features: all counts cancelled");
    return SparseVec(dim, std::move(entries)).normalized();
}

// r = (stars − 3)/2 ∈ {−1, −0.5, 0, 0.5, 1}; the resulting feedback bias is
// (1 + 0.25·(stars_m − stars_n))/2.
inline double star_reward(int stars) {
    if (stars < 1 || stars > 5) throw std::invalid_argument("star_reward: stars must be in [1,5]");
    return (stars - 3) / 2.0;
}

// (max rating − rating of the pick) / 4 ∈ [0, 1]
inline double test_error(std::span<const int> ratings, std::size_t picked) {
    if (picked >= ratings.size()) throw std::invalid_argument("test_error: index out of range");
    int best = 1;
    for (int r : ratings) {
        if (r < 1 || r > 5) throw std::invalid_argument("test_error: rating out of [1,5]");
        best = std::max(best, r);
    }
    return (best - ratings[picked]) / 4.0;
}

struct DatasetSplit {
    std::vector<std::size_t> train, dev, test;
};

// Shuffled 75/15/10 partition: train gets ⌊0.75n⌋, dev ⌊0.15n⌋, test the rest.
inline DatasetSplit split_dataset(std::size_t n_reviews, std::uint64_t seed) {
    if (n_reviews < 10) throw std::invalid_argument("split_dataset: need at least 10 reviews");
    std::vector<std::size_t> idx(n_reviews);
    for (std::size_t i = 0; i < n_reviews; ++i) idx[i] = i;
    Rng rng(mix_seed(seed));
    for (std::size_t i = 0; i + 1 < n_reviews; ++i) {
        const std::size_t j = i + rng.below(n_reviews - i);
        std::swap(idx[i], idx[j]);
    }
    const auto n_train = static_cast<std::size_t>(0.75 * static_cast<double>(n_reviews));
    const auto n_dev = static_cast<std::size_t>(0.15 * static_cast<double>(n_reviews));
    DatasetSplit split;
    split.train.assign(idx.begin(), idx.begin() + n_train);
    split.dev.assign(idx.begin() + n_train, idx.begin() + n_train + n_dev);
    split.test.assign(idx.begin() + n_train + n_dev, idx.end());
    return split;
}

struct FeaturizedReview {
    int stars = 3;
    SparseVec phi;
    std::string domain;
};

// Preprocess + hash every review; reviews with an empty token stream are
// dropped, matching the corpus-side contract.
inline std::vector<FeaturizedReview> featurize_corpus(std::span<const Review> reviews,
                                                      std::uint32_t dim) {
    std::vector<FeaturizedReview> out;
    out.reserve(reviews.size());
    for (const auto& r : reviews) {
        const std::string clean = preprocess_text(r.text);
        if (clean.empty()) continue;
        try {
            out.push_back({r.stars, bigram_hash_features(clean, dim), r.domain});
        } catch (const std::invalid_argument&) {
            continue;  // degenerate token stream
        }
    }
    return out;
}

struct TextRound {
    Round round;
    std::vector<int> stars;
};

// Streams rounds of K distinct same-domain reviews drawn from one split.
// Domains smaller than K are excluded; the domain of a round is chosen in
// proportion to its eligible review count.
class ReviewRounds {
public:
    ReviewRounds(std::span<const FeaturizedReview> reviews, std::span<const std::size_t> subset,
                 std::size_t k, std::uint64_t seed)
        : reviews_(reviews), k_(k), rng_(mix_seed(seed)) {
        if (k_ < 2) throw std::invalid_argument("ReviewRounds: need K >= 2");
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t idx : subset) {
            if (idx >= reviews_.size()) throw std::invalid_argument("ReviewRounds: bad index");
            groups[reviews_[idx].domain].push_back(idx);
        }
        for (auto& [name, members] : groups)
            if (members.size() >= k_) {
                eligible_ += members.size();
                groups_.push_back(std::move(members));
            }
        if (groups_.empty())
            throw std::invalid_argument("ReviewRounds: no domain has at least K reviews");
    }

    TextRound next() {
        // domain by size-weighted draw
        std::size_t pick = rng_.below(eligible_);
        std::size_t g = 0;
        while (pick >= groups_[g].size()) pick -= groups_[g++].size();

        std::vector<std::size_t> pool = groups_[g];
        TextRound tr;
        tr.round.items.reserve(k_);
        tr.round.rewards.reserve(k_);
        tr.stars.reserve(k_);
        for (std::size_t i = 0; i < k_; ++i) {
            const std::size_t j = i + rng_.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            const auto& rv = reviews_[pool[i]];
            tr.round.items.push_back(rv.phi);
            tr.round.rewards.push_back(star_reward(rv.stars));
            tr.stars.push_back(rv.stars);
        }
        return tr;
    }

private:
    std::span<const FeaturizedReview> reviews_;
    std::size_t k_;
    std::vector<std::vector<std::size_t>> groups_;
    std::size_t eligible_ = 0;
    Rng rng_;
};

// --- file formats ---------------------------------------------------------

// TSV: stars<TAB>text[<TAB>domain], UTF-8, one review per line.
inline std::vector<Review> load_reviews_tsv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open TSV corpus: " + path);
    std::vector<Review> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab1 = line.find('\t');
        if (tab1 == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing tab");
        Review r;
        try {
            r.stars = std::stoi(line.substr(0, tab1));
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad star rating");
        }
        if (r.stars < 1 || r.stars > 5)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": stars out of [1,5]");
        const auto tab2 = line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) {
            r.text = line.substr(tab1 + 1);
        } else {
            r.text = line.substr(tab1 + 1, tab2 - tab1 - 1);
            r.domain = line.substr(tab2 + 1);
        }
        out.push_back(std::move(r));
    }
    return out;
}

// Pre-featurized sparse format: a `dim <D>` header line, then one review per
// line as `stars idx:val idx:val ...`. Values use 17 significant digits so
// dump → load is lossless.
inline void dump_featurized(std::span<const FeaturizedReview> reviews, std::uint32_t dim,
                            std::ostream& os) {
    os << "dim " << dim << '\n';
    char buf[40];
    for (const auto& r : reviews) {
        os << r.stars;
        for (const auto& [idx, val] : r.phi.entries()) {
            std::snprintf(buf, sizeof buf, "%.17g", val);
            os << ' ' << idx << ':' << buf;
        }
        os << '\n';
    }
}

inline std::vector<FeaturizedReview> load_featurized(std::istream& is, const std::string& name) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(name + ": empty file");
    std::istringstream hdr(line);
    std::string tag;
    std::uint32_t dim = 0;
    hdr >> tag >> dim;
    if (tag != "dim" || dim == 0) throw std::runtime_error(name + ": expected 'dim <D>' header");

    std::vector<FeaturizedReview> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        FeaturizedReview r;
        if (!(ls >> r.stars) || r.stars < 1 || r.stars > 5)
            throw std::runtime_error(name + ":" + std::to_string(lineno) + ": bad star rating");
        std::vector<SparseVec::Entry> entries;
        std::string tok;
        while (ls >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                         ": expected idx:val");
            const auto idx = static_cast<std::uint32_t>(std::stoul(tok.substr(0, colon)));
            const double val = std::strtod(tok.c_str() + colon + 1, nullptr);
            entries.emplace_back(idx, val);
        }
        r.phi = SparseVec(dim, std::move(entries));
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<FeaturizedReview> load_featurized(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open featurized corpus: " + path);
    return load_featurized(is, path);
}

// --- synthetic corpus ------------------------------------------------------

// Desk-scale review generator with star-correlated vocabulary. Raw texts
// include uppercase runs, emoticons, URLs, ellipses and HTML so the
// preprocessing path is exercised end to end.
inline std::vector<Review> synthetic_review_corpus(std::size_t n, std::uint64_t seed) {
    static const std::array<std::string_view, 16> positive{
        "excellent", "great", "love", "perfect", "amazing", "wonderful", "best", "fantastic",
        "awesome", "superb", "delightful", "happy", "recommend", "solid", "quality", "works"};
    static const std::array<std::string_view, 16> negative{
        "terrible", "awful", "broke", "worst", "bad", "refund", "waste", "poor",
        "disappointing", "useless", "horrible", "return", "defective", "junk", "regret", "broken"};
    static const std::array<std::string_view, 20> neutral{
        "the", "a", "it", "this", "product", "item", "box", "ordered", "arrived", "day",
        "week", "store", "price", "color", "size", "one", "two", "use", "used", "time"};

    Rng rng(mix_seed(seed));
    std::vector<Review> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Review r;
        r.stars = 1 + static_cast<int>(rng.below(5));
        r.domain = "synthetic";
        const double p_pos = (r.stars - 1) / 4.0;
        const std::size_t len = 20 + rng.below(21);
        std::string text;
        for (std::size_t t = 0; t < len; ++t) {
            std::string tok;
            const double u = rng.real01();
            if (u < 0.6) {
                tok = rng.bernoulli(p_pos) ? std::string(positive[rng.below(positive.size())])
                                           : std::string(negative[rng.below(negative.size())]);
            } else {
                tok = std::string(neutral[rng.below(neutral.size())]);
            }
            if (rng.bernoulli(0.05))
                for (auto& c : tok) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            if (rng.bernoulli(0.02)) tok = "<b>" + tok + "</b>";
            if (!text.empty()) text.push_back(' ');
            text += tok;
            if (rng.bernoulli(0.04)) text += r.stars >= 4 ? " :)" : (r.stars <= 2 ? " :(" : "");
            if (rng.bernoulli(0.02)) text += " ...";
            if (rng.bernoulli(0.015)) text += " http://example.com/item";
        }
        r.text = std::move(text);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace conquer
