#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "conquer/rng.hpp"
#include "conquer/second_order_matrix.hpp"
#include "conquer/sparse_vec.hpp"

namespace conquer {

// Pair-selection policies. The first pick m is always the score argmax; the
// policies differ only in how the second item n is chosen:
//   ttg - second best score
//   gnr - uniform random among the rest
//   gnu - best score + per-item confidence width
//   gnc - best relative upper-confidence score, with an optional skip when
//         even the optimistic challenger cannot beat m
enum class PolicyKind { ttg, gnr, gnu, gnc };

inline const char* policy_name(PolicyKind p) {
    switch (p) {
        case PolicyKind::ttg: return "ttg";
        case PolicyKind::gnr: return "gnr";
        case PolicyKind::gnu: return "gnu";
        case PolicyKind::gnc: return "gnc";
    }
    return "?";
}

inline std::optional<PolicyKind> policy_from_name(std::string_view s) {
    if (s == "ttg") return PolicyKind::ttg;
    if (s == "gnr") return PolicyKind::gnr;
    if (s == "gnu") return PolicyKind::gnu;
    if (s == "gnc") return PolicyKind::gnc;
    return std::nullopt;
}

struct ProjectionOptions {
    bool enabled = false;  // off by default; the constraint is analysis-only
    int max_sweeps = 100;
    double tol = 1e-6;
    // constraint visit order is cyclic unless a seed is given, in which case
    // each sweep shuffles the order deterministically
    std::optional<std::uint64_t> shuffle_seed;
};

struct ProjectionResult {
    std::vector<double> w;
    bool converged = false;
    int sweeps_used = 0;
};

// Projection of w0 onto { w : |w·Φ_m| ≤ 1 for all items } under the
// Mahalanobis distance ½(a−b)ᵀA(a−b). Cyclic row-action method with dual
// correction: visiting one-sided constraint g·w ≤ 1 with multiplier λ ≥ 0,
// the step is δ = max(−λ, (g·v − 1)/(gᵀA⁻¹g)), v ← v − δ·A⁻¹g, λ ← λ + δ.
// With λ = 0 and the constraint violated this is a plain single-constraint
// projection; the correction makes the cycle converge to the argmin rather
// than to an arbitrary feasible point. Converged when a full sweep moves no
// coordinate by more than tol and every constraint holds within tol.
inline ProjectionResult project_weights(const SecondOrderMatrix& a, std::span<const double> w0,
                                        std::span<const SparseVec> items, int max_sweeps,
                                        double tol,
                                        std::optional<std::uint64_t> shuffle_seed = std::nullopt) {
    if (items.empty()) throw std::invalid_argument("project_weights: no items");
    for (const auto& it : items)
        if (it.dim() != a.dim()) throw std::invalid_argument("project_weights: dim mismatch");

    ProjectionResult res;
    res.w.assign(w0.begin(), w0.end());

    const std::size_t m = items.size();
    std::vector<std::vector<double>> dir(m);     // A⁻¹Φ_i
    std::vector<double> kappa(m, 0.0);           // Φ_iᵀA⁻¹Φ_i
    std::vector<double> dir_inf(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        dir[i] = a.inv_apply(items[i]);
        kappa[i] = dot(std::span<const double>(dir[i]), items[i]);
        for (double v : dir[i]) dir_inf[i] = std::max(dir_inf[i], std::fabs(v));
    }

    std::vector<double> lam_pos(m, 0.0), lam_neg(m, 0.0);

    const auto feasible = [&]() {
        for (std::size_t i = 0; i < m; ++i)
            if (std::fabs(dot(std::span<const double>(res.w), items[i])) > 1.0 + tol)
                return false;
        return true;
    };

    if (max_sweeps <= 0) {
        res.converged = feasible();
        return res;
    }

    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::optional<Rng> order_rng;
    if (shuffle_seed) order_rng.emplace(mix_seed(*shuffle_seed));

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (order_rng)
            for (std::size_t i = 0; i + 1 < m; ++i)
                std::swap(order[i], order[i + order_rng->below(m - i)]);
        double max_move = 0.0;
        for (const std::size_t i : order) {
            if (kappa[i] <= 0.0) continue;  // zero feature vector, constraint vacuous
            for (int sign : {+1, -1}) {
                const double s = sign * dot(std::span<const double>(res.w), items[i]);
                double& lam = sign > 0 ? lam_pos[i] : lam_neg[i];
                const double delta = std::max(-lam, (s - 1.0) / kappa[i]);
                if (delta == 0.0) continue;
                const double step = delta * sign;
                for (std::uint32_t r = 0; r < a.dim(); ++r) res.w[r] -= step * dir[i][r];
                lam += delta;
                max_move = std::max(max_move, std::fabs(delta) * dir_inf[i]);
            }
        }
        ++res.sweeps_used;
        if (max_move <= tol && feasible()) {
            res.converged = true;
            break;
        }
    }
    return res;
}

struct PairDecision {
    std::size_t m = 0;
    std::optional<std::size_t> n;
    bool queried = true;
    double beta = 0.0;  // gnc's β(n); 0 for the other policies
    std::vector<double> scores;
};

struct UpdateStats {
    double h = 0.0;  // zᵀ A_prev⁻¹ z, the confidence mass spent this round
    bool zero_update = false;
};

// Learner state: weight vector w, confidence matrix A (starting at identity)
// and the confidence scale η. One instance is owned by a single worker.
class LinearModel {
public:
    LinearModel(std::uint32_t dim, MatrixKind kind, double eta,
                std::uint64_t refresh_every = 10000)
        : w_(dim, 0.0), a_(kind, dim, refresh_every) {
        set_eta(eta);
    }

    static LinearModel restore(std::vector<double> w, SecondOrderMatrix a, double eta,
                               std::uint64_t rounds) {
        if (w.size() != a.dim()) throw std::invalid_argument("restore: dim mismatch");
        LinearModel model(a.dim(), a.kind(), eta);
        model.w_ = std::move(w);
        model.a_ = std::move(a);
        model.rounds_ = rounds;
        return model;
    }

    std::uint32_t dim() const { return a_.dim(); }
    double eta() const { return eta_; }
    void set_eta(double eta) {
        if (!(eta > 0.0)) throw std::invalid_argument("LinearModel: eta must be positive");
        eta_ = eta;
    }
    std::uint64_t rounds() const { return rounds_; }
    const std::vector<double>& weights() const { return w_; }
    const SecondOrderMatrix& matrix() const { return a_; }

    // w̃ for the current round: the projected vector if a projection ran
    // since the last update, otherwise w itself.
    const std::vector<double>& w_tilde() const { return use_proj_ ? w_proj_ : w_; }

    // Runs the per-round projection when enabled. Returns false when the
    // sweep budget ran out before convergence (the iterate is kept anyway).
    bool project_for_round(std::span<const SparseVec> items, const ProjectionOptions& opts) {
        if (!opts.enabled) {
            use_proj_ = false;
            return true;
        }
        auto res = project_weights(a_, w_, items, opts.max_sweeps, opts.tol, opts.shuffle_seed);
        w_proj_ = std::move(res.w);
        use_proj_ = true;
        return res.converged;
    }

    // Δ̂(m) = w̃ · Φ(x, m)
    std::vector<double> score_items(std::span<const SparseVec> items) const {
        std::vector<double> s(items.size());
        for (std::size_t i = 0; i < items.size(); ++i)
            s[i] = dot(std::span<const double>(w_tilde()), items[i]);
        return s;
    }

    // ε(m) = √(η · ΦᵀA⁻¹Φ)
    double confidence_eps(const SparseVec& item) const {
        return std::sqrt(eta_ * a_.inv_quad_form(item));
    }

    // ε(m, n) = √(η · (Φm−Φn)ᵀA⁻¹(Φm−Φn))
    double confusion_eps(const SparseVec& item_m, const SparseVec& item_n) const {
        const SparseVec diff = linear_combine(1.0, item_m, -1.0, item_n);
        return std::sqrt(eta_ * a_.inv_quad_form(diff));
    }

    PairDecision select_pair(std::span<const SparseVec> items, PolicyKind policy,
                             Rng& rng) const {
        if (items.size() < 2)
            throw std::invalid_argument("select_pair: need at least two items");

        PairDecision d;
        d.scores = score_items(items);

        d.m = 0;
        for (std::size_t i = 1; i < items.size(); ++i)
            if (d.scores[i] > d.scores[d.m]) d.m = i;  // ties keep lowest index

        switch (policy) {
            case PolicyKind::ttg: {
                d.n = argmax_excluding(d.scores, d.m);
                break;
            }
            case PolicyKind::gnr: {
                std::size_t pick = rng.below(items.size() - 1);
                if (pick >= d.m) ++pick;
                d.n = pick;
                break;
            }
            case PolicyKind::gnu: {
                std::vector<double> ucb(items.size());
                for (std::size_t i = 0; i < items.size(); ++i)
                    ucb[i] = d.scores[i] + confidence_eps(items[i]);
                d.n = argmax_excluding(ucb, d.m);
                break;
            }
            case PolicyKind::gnc: {
                std::vector<double> beta(items.size());
                for (std::size_t i = 0; i < items.size(); ++i) {
                    if (i == d.m) continue;
                    beta[i] = d.scores[i] - d.scores[d.m] + confusion_eps(items[i], items[d.m]);
                }
                const std::size_t best = argmax_excluding(beta, d.m);
                d.beta = beta[best];
                if (d.beta < 0.0) {  // skip only on strict β < 0
                    d.queried = false;
                } else {
                    d.n = best;
                }
                break;
            }
        }
        return d;
    }

    // Second-order update with z = ½y(Φm − Φn):
    //   A ← A + zzᵀ,  w ← A_new⁻¹ (A_old w̃ + z)
    UpdateStats update(const SparseVec& item_m, const SparseVec& item_n, int y) {
        if (y != 1 && y != -1) throw std::invalid_argument("update: y must be ±1");
        const SparseVec z = linear_combine(0.5 * y, item_m, -0.5 * y, item_n);

        UpdateStats stats;
        stats.h = a_.inv_quad_form(z);
        stats.zero_update = z.empty();

        if (a_.kind() == MatrixKind::diagonal) {
            // A_old and A_new agree off the support of z, so only supported
            // coordinates of w change.
            if (use_proj_) w_ = w_proj_;
            for (const auto& [i, zi] : z.entries()) {
                const double old_d = a_.diag_at(i);
                const double new_d = old_d + zi * zi;
                w_[i] = (old_d * w_[i] + zi) / new_d;
            }
            a_.rank_one_update(z);
        } else {
            std::vector<double> v = a_.apply(w_tilde());
            add_scaled(v, 1.0, z);
            a_.rank_one_update(z);
            w_ = a_.solve(v);
        }
        use_proj_ = false;
        ++rounds_;
        return stats;
    }

private:
    static std::size_t argmax_excluding(const std::vector<double>& vals, std::size_t skip) {
        std::size_t best = skip == 0 ? 1 : 0;
        for (std::size_t i = best + 1; i < vals.size(); ++i) {
            if (i == skip) continue;
            if (vals[i] > vals[best]) best = i;
        }
        return best;
    }

    std::vector<double> w_;
    std::vector<double> w_proj_;
    bool use_proj_ = false;
    SecondOrderMatrix a_;
    double eta_ = 1.0;
    std::uint64_t rounds_ = 0;
};

}  // namespace conquer
