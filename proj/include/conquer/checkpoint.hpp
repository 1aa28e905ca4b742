#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "conquer/linear_model.hpp"

namespace conquer {

// Versioned text checkpoint. Values are written as C hexfloats so the
// round-trip is lossless. The Full-kind maintained inverse is derived state
// and is recomputed on load. Layout:
//
//   conquer-model 1
//   kind diag|full
//   dim <D>
//   eta <hexfloat>
//   rounds <N>
//   w <D hexfloats>
//   diag <D hexfloats>            (diagonal kind)
//   row <D hexfloats>             (full kind, D lines)
//   end

namespace detail {

inline std::string hexfloat(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline void write_values(std::ostream& os, const char* tag, const double* vals, std::size_t n) {
    os << tag;
    for (std::size_t i = 0; i < n; ++i) os << ' ' << hexfloat(vals[i]);
    os << '\n';
}

inline std::vector<double> read_values(std::istream& is, const std::string& tag, std::size_t n) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("checkpoint: truncated file");
    std::istringstream ls(line);
    std::string got;
    ls >> got;
    if (got != tag) throw std::runtime_error("checkpoint: expected '" + tag + "' line");
    std::vector<double> vals(n);
    std::string tok;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(ls >> tok)) throw std::runtime_error("checkpoint: short value line");
        vals[i] = std::strtod(tok.c_str(), nullptr);
    }
    return vals;
}

}  // namespace detail

inline void save_model(const LinearModel& model, std::ostream& os) {
    const auto& a = model.matrix();
    os << "conquer-model 1\n";
    os << "kind " << (a.kind() == MatrixKind::diagonal ? "diag" : "full") << '\n';
    os << "dim " << a.dim() << '\n';
    os << "eta " << detail::hexfloat(model.eta()) << '\n';
    os << "rounds " << model.rounds() << '\n';
    detail::write_values(os, "w", model.weights().data(), a.dim());
    if (a.kind() == MatrixKind::diagonal) {
        detail::write_values(os, "diag", a.raw().data(), a.dim());
    } else {
        for (std::uint32_t i = 0; i < a.dim(); ++i)
            detail::write_values(os, "row", a.raw().data() + static_cast<std::size_t>(i) * a.dim(),
                                 a.dim());
    }
    os << "end\n";
}

inline LinearModel load_model(std::istream& is) {
    std::string line, word;
    if (!std::getline(is, line) || line != "conquer-model 1")
        throw std::runtime_error("checkpoint: bad header");

    const auto expect_kv = [&](const std::string& key) -> std::string {
        if (!std::getline(is, line)) throw std::runtime_error("checkpoint: truncated file");
        std::istringstream ls(line);
        std::string k, v;
        ls >> k >> v;
        if (k != key) throw std::runtime_error("checkpoint: expected '" + key + "'");
        return v;
    };

    const std::string kind_s = expect_kv("kind");
    MatrixKind kind;
    if (kind_s == "diag")
        kind = MatrixKind::diagonal;
    else if (kind_s == "full")
        kind = MatrixKind::full;
    else
        throw std::runtime_error("checkpoint: unknown kind '" + kind_s + "'");

    const auto dim = static_cast<std::uint32_t>(std::stoul(expect_kv("dim")));
    const double eta = std::strtod(expect_kv("eta").c_str(), nullptr);
    const std::uint64_t rounds = std::stoull(expect_kv("rounds"));

    std::vector<double> w = detail::read_values(is, "w", dim);

    SecondOrderMatrix a = [&] {
        if (kind == MatrixKind::diagonal)
            return SecondOrderMatrix::from_diagonal(detail::read_values(is, "diag", dim));
        std::vector<double> rows;
        rows.reserve(static_cast<std::size_t>(dim) * dim);
        for (std::uint32_t i = 0; i < dim; ++i) {
            auto r = detail::read_values(is, "row", dim);
            rows.insert(rows.end(), r.begin(), r.end());
        }
        return SecondOrderMatrix::from_full(dim, std::move(rows));
    }();

    if (!std::getline(is, line) || line != "end")
        throw std::runtime_error("checkpoint: missing end marker");
    return LinearModel::restore(std::move(w), std::move(a), eta, rounds);
}

inline void save_model(const LinearModel& model, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    save_model(model, os);
}

inline LinearModel load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("checkpoint: cannot open for read: " + path);
    return load_model(is);
}

}  // namespace conquer
