#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "conquer/sparse_vec.hpp"

namespace conquer {

enum class MatrixKind { full, diagonal };

// Positive-definite confidence matrix A, initialized to identity and grown by
// rank-one updates A += z zᵀ. The Full kind keeps an explicit maintained
// inverse, updated per rank-one step in O(D²); the Diagonal kind keeps only
// the diagonal, so its inverse is the elementwise reciprocal.
class SecondOrderMatrix {
public:
    // refresh_every: for the Full kind, recompute the inverse from scratch
    // after this many updates to bound floating-point drift; 0 disables.
    explicit SecondOrderMatrix(MatrixKind kind, std::uint32_t dim,
                               std::uint64_t refresh_every = 10000)
        : kind_(kind), dim_(dim), refresh_every_(refresh_every) {
        if (dim_ == 0) throw std::invalid_argument("SecondOrderMatrix: dim must be positive");
        if (kind_ == MatrixKind::diagonal) {
            mat_.assign(dim_, 1.0);
        } else {
            mat_.assign(static_cast<std::size_t>(dim_) * dim_, 0.0);
            inv_.assign(static_cast<std::size_t>(dim_) * dim_, 0.0);
            for (std::uint32_t i = 0; i < dim_; ++i) {
                mat_[idx(i, i)] = 1.0;
                inv_[idx(i, i)] = 1.0;
            }
        }
    }

    static SecondOrderMatrix from_diagonal(std::vector<double> diag,
                                           std::uint64_t refresh_every = 10000) {
        SecondOrderMatrix m(MatrixKind::diagonal, static_cast<std::uint32_t>(diag.size()),
                            refresh_every);
        for (double d : diag)
            if (!(d >= 1.0)) throw std::invalid_argument("diagonal entries must be >= 1");
        m.mat_ = std::move(diag);
        return m;
    }

    static SecondOrderMatrix from_full(std::uint32_t dim, std::vector<double> rows,
                                       std::uint64_t refresh_every = 10000) {
        if (rows.size() != static_cast<std::size_t>(dim) * dim)
            throw std::invalid_argument("from_full: bad row data size");
        SecondOrderMatrix m(MatrixKind::full, dim, refresh_every);
        m.mat_ = std::move(rows);
        m.refresh_inverse();
        return m;
    }

    MatrixKind kind() const { return kind_; }
    std::uint32_t dim() const { return dim_; }
    std::uint64_t update_count() const { return updates_; }

    double at(std::uint32_t i, std::uint32_t j) const {
        check_index(i, j);
        if (kind_ == MatrixKind::diagonal) return i == j ? mat_[i] : 0.0;
        return mat_[idx(i, j)];
    }

    double inv_at(std::uint32_t i, std::uint32_t j) const {
        check_index(i, j);
        if (kind_ == MatrixKind::diagonal) return i == j ? 1.0 / mat_[i] : 0.0;
        return inv_[idx(i, j)];
    }

    double diag_at(std::uint32_t i) const { return at(i, i); }

    // vᵀ A⁻¹ v over the sparse support of v
    double inv_quad_form(const SparseVec& v) const {
        if (v.dim() != dim_) throw std::invalid_argument("inv_quad_form: dimension mismatch");
        const auto& es = v.entries();
        if (kind_ == MatrixKind::diagonal) {
            double s = 0.0;
            for (const auto& [i, x] : es) s += x * x / mat_[i];
            return s;
        }
        double s = 0.0;
        for (const auto& [i, xi] : es) {
            const double* row = &inv_[idx(i, 0)];
            double acc = 0.0;
            for (const auto& [j, xj] : es) acc += row[j] * xj;
            s += xi * acc;
        }
        return s;
    }

    // A⁻¹ v as a dense vector
    std::vector<double> inv_apply(const SparseVec& v) const {
        if (v.dim() != dim_) throw std::invalid_argument("inv_apply: dimension mismatch");
        std::vector<double> out(dim_, 0.0);
        if (kind_ == MatrixKind::diagonal) {
            for (const auto& [i, x] : v.entries()) out[i] = x / mat_[i];
            return out;
        }
        for (const auto& [j, x] : v.entries())
            for (std::uint32_t i = 0; i < dim_; ++i) out[i] += inv_[idx(i, j)] * x;
        return out;
    }

    // A += z zᵀ (Full: inverse maintained by the rank-one inverse identity;
    // Diagonal: A_rr += z_r²). A zero z is a no-op.
    void rank_one_update(const SparseVec& z) {
        if (z.dim() != dim_) throw std::invalid_argument("rank_one_update: dimension mismatch");
        if (z.empty()) return;
        const auto& es = z.entries();
        if (kind_ == MatrixKind::diagonal) {
            for (const auto& [i, x] : es) mat_[i] += x * x;
            ++updates_;
            return;
        }
        for (const auto& [i, xi] : es)
            for (const auto& [j, xj] : es) mat_[idx(i, j)] += xi * xj;
        // A⁻¹ ← A⁻¹ − (A⁻¹z zᵀA⁻¹)/(1 + zᵀA⁻¹z)
        std::vector<double> u = inv_apply(z);
        double denom = 1.0;
        for (const auto& [i, x] : es) denom += x * u[i];
        for (std::uint32_t i = 0; i < dim_; ++i) {
            const double ui = u[i] / denom;
            if (ui == 0.0) continue;
            double* row = &inv_[idx(i, 0)];
            for (std::uint32_t j = 0; j < dim_; ++j) row[j] -= ui * u[j];
        }
        ++updates_;
        if (refresh_every_ != 0 && updates_ % refresh_every_ == 0) refresh_inverse();
    }

    // A⁻¹ b
    std::vector<double> solve(std::span<const double> b) const {
        if (b.size() != dim_) throw std::invalid_argument("solve: dimension mismatch");
        std::vector<double> out(dim_, 0.0);
        if (kind_ == MatrixKind::diagonal) {
            for (std::uint32_t i = 0; i < dim_; ++i) out[i] = b[i] / mat_[i];
            return out;
        }
        for (std::uint32_t i = 0; i < dim_; ++i) {
            const double* row = &inv_[idx(i, 0)];
            double s = 0.0;
            for (std::uint32_t j = 0; j < dim_; ++j) s += row[j] * b[j];
            out[i] = s;
        }
        return out;
    }

    // A w
    std::vector<double> apply(std::span<const double> w) const {
        if (w.size() != dim_) throw std::invalid_argument("apply: dimension mismatch");
        std::vector<double> out(dim_, 0.0);
        if (kind_ == MatrixKind::diagonal) {
            for (std::uint32_t i = 0; i < dim_; ++i) out[i] = mat_[i] * w[i];
            return out;
        }
        for (std::uint32_t i = 0; i < dim_; ++i) {
            const double* row = &mat_[idx(i, 0)];
            double s = 0.0;
            for (std::uint32_t j = 0; j < dim_; ++j) s += row[j] * w[j];
            out[i] = s;
        }
        return out;
    }

    // Recompute the Full-kind inverse from A by Gauss-Jordan elimination with
    // partial pivoting. No-op for the Diagonal kind.
    void refresh_inverse() {
        if (kind_ == MatrixKind::diagonal) return;
        const std::uint32_t n = dim_;
        std::vector<double> a = mat_;
        std::vector<double> inv(static_cast<std::size_t>(n) * n, 0.0);
        for (std::uint32_t i = 0; i < n; ++i) inv[idx(i, i)] = 1.0;
        for (std::uint32_t col = 0; col < n; ++col) {
            std::uint32_t piv = col;
            for (std::uint32_t r = col + 1; r < n; ++r)
                if (std::fabs(a[idx(r, col)]) > std::fabs(a[idx(piv, col)])) piv = r;
            if (a[idx(piv, col)] == 0.0)
                throw std::runtime_error("refresh_inverse: singular matrix");
            if (piv != col) {
                for (std::uint32_t j = 0; j < n; ++j) {
                    std::swap(a[idx(piv, j)], a[idx(col, j)]);
                    std::swap(inv[idx(piv, j)], inv[idx(col, j)]);
                }
            }
            const double d = a[idx(col, col)];
            for (std::uint32_t j = 0; j < n; ++j) {
                a[idx(col, j)] /= d;
                inv[idx(col, j)] /= d;
            }
            for (std::uint32_t r = 0; r < n; ++r) {
                if (r == col) continue;
                const double f = a[idx(r, col)];
                if (f == 0.0) continue;
                for (std::uint32_t j = 0; j < n; ++j) {
                    a[idx(r, j)] -= f * a[idx(col, j)];
                    inv[idx(r, j)] -= f * inv[idx(col, j)];
                }
            }
        }
        inv_ = std::move(inv);
    }

    // raw storage, used by the checkpoint writer
    const std::vector<double>& raw() const { return mat_; }

private:
    std::size_t idx(std::uint32_t i, std::uint32_t j) const {
        return static_cast<std::size_t>(i) * dim_ + j;
    }

    void check_index(std::uint32_t i, std::uint32_t j) const {
        if (i >= dim_ || j >= dim_)
            throw std::invalid_argument("SecondOrderMatrix: index out of range");
    }

    MatrixKind kind_;
    std::uint32_t dim_;
    std::vector<double> mat_;
    std::vector<double> inv_;
    std::uint64_t updates_ = 0;
    std::uint64_t refresh_every_;
};

}  // namespace conquer
