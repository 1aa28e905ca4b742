#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace conquer {

// Sparse feature vector. Indices are strictly increasing, values finite.
// Item vectors handed to the learners are expected to be unit-normalized.
class SparseVec {
public:
    using Entry = std::pair<std::uint32_t, double>;

    SparseVec() = default;

    SparseVec(std::uint32_t dim, std::vector<Entry> entries)
        : dim_(dim), entries_(std::move(entries)) {
        if (dim_ == 0) throw std::invalid_argument("SparseVec: dimension must be positive");
        std::uint32_t prev = 0;
        bool first = true;
        for (const auto& [idx, val] : entries_) {
            if (idx >= dim_) throw std::invalid_argument("SparseVec: index out of range");
            if (!first && idx <= prev)
                throw std::invalid_argument("SparseVec: indices must be strictly increasing");
            if (!std::isfinite(val)) throw std::invalid_argument("SparseVec: non-finite value");
            prev = idx;
            first = false;
        }
    }

    // Accepts arbitrary order, merges duplicate indices, drops exact zeros.
    static SparseVec from_unsorted(std::uint32_t dim, std::vector<Entry> entries) {
        std::sort(entries.begin(), entries.end(),
                  [](const Entry& a, const Entry& b) { return a.first < b.first; });
        std::vector<Entry> merged;
        merged.reserve(entries.size());
        for (const auto& e : entries) {
            if (!merged.empty() && merged.back().first == e.first)
                merged.back().second += e.second;
            else
                merged.push_back(e);
        }
        std::erase_if(merged, [](const Entry& e) { return e.second == 0.0; });
        return SparseVec(dim, std::move(merged));
    }

    static SparseVec unit(std::uint32_t dim, std::uint32_t index) {
        return SparseVec(dim, {{index, 1.0}});
    }

    static SparseVec from_dense(std::span<const double> v) {
        std::vector<Entry> es;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] != 0.0) es.emplace_back(static_cast<std::uint32_t>(i), v[i]);
        return SparseVec(static_cast<std::uint32_t>(v.size()), std::move(es));
    }

    std::uint32_t dim() const { return dim_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t nnz() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    double norm() const {
        double s = 0.0;
        for (const auto& [i, v] : entries_) s += v * v;
        return std::sqrt(s);
    }

    SparseVec normalized() const {
        const double n = norm();
        if (n == 0.0) throw std::invalid_argument("SparseVec: cannot normalize zero vector");
        std::vector<Entry> es = entries_;
        for (auto& [i, v] : es) v /= n;
        return SparseVec(dim_, std::move(es));
    }

    std::vector<double> to_dense() const {
        std::vector<double> d(dim_, 0.0);
        for (const auto& [i, v] : entries_) d[i] = v;
        return d;
    }

    bool operator==(const SparseVec& o) const = default;

private:
    std::uint32_t dim_ = 1;
    std::vector<Entry> entries_;
};

inline double dot(const SparseVec& a, const SparseVec& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    const auto& ea = a.entries();
    const auto& eb = b.entries();
    std::size_t i = 0, j = 0;
    while (i < ea.size() && j < eb.size()) {
        if (ea[i].first < eb[j].first)
            ++i;
        else if (ea[i].first > eb[j].first)
            ++j;
        else {
            s += ea[i].second * eb[j].second;
            ++i;
            ++j;
        }
    }
    return s;
}

inline double dot(std::span<const double> w, const SparseVec& v) {
    if (w.size() != v.dim()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (const auto& [i, x] : v.entries()) s += w[i] * x;
    return s;
}

inline void add_scaled(std::vector<double>& acc, double c, const SparseVec& v) {
    if (acc.size() != v.dim()) throw std::invalid_argument("add_scaled: dimension mismatch");
    for (const auto& [i, x] : v.entries()) acc[i] += c * x;
}

// ca*a + cb*b with merged supports; exact zeros dropped, so equal inputs with
// opposite coefficients yield an empty vector.
inline SparseVec linear_combine(double ca, const SparseVec& a, double cb, const SparseVec& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("linear_combine: dimension mismatch");
    std::vector<SparseVec::Entry> out;
    out.reserve(a.nnz() + b.nnz());
    const auto& ea = a.entries();
    const auto& eb = b.entries();
    std::size_t i = 0, j = 0;
    while (i < ea.size() || j < eb.size()) {
        std::uint32_t idx;
        double val;
        if (j >= eb.size() || (i < ea.size() && ea[i].first < eb[j].first)) {
            idx = ea[i].first;
            val = ca * ea[i].second;
            ++i;
        } else if (i >= ea.size() || eb[j].first < ea[i].first) {
            idx = eb[j].first;
            val = cb * eb[j].second;
            ++j;
        } else {
            idx = ea[i].first;
            val = ca * ea[i].second + cb * eb[j].second;
            ++i;
            ++j;
        }
        if (val != 0.0) out.emplace_back(idx, val);
    }
    return SparseVec(a.dim(), std::move(out));
}

inline SparseVec sum_scaled(std::span<const SparseVec* const> vs, double factor) {
    if (vs.empty()) throw std::invalid_argument("sum_scaled: empty input");
    std::vector<SparseVec::Entry> all;
    for (const SparseVec* v : vs) {
        if (v->dim() != vs[0]->dim())
            throw std::invalid_argument("sum_scaled: dimension mismatch");
        for (const auto& [i, x] : v->entries()) all.emplace_back(i, factor * x);
    }
    return SparseVec::from_unsorted(vs[0]->dim(), std::move(all));
}

}  // namespace conquer
