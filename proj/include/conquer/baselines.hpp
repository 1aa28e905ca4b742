#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "conquer/rng.hpp"
#include "conquer/second_order_matrix.hpp"
#include "conquer/sparse_vec.hpp"

namespace conquer {

// The baselines pick a single item per round and receive a binary signal
// telling whether the picked item's reward is maximal in the set. Both score
// the shared per-item feature vectors with one weight vector, the same way
// the pair-selection learners consume items.
using IsBestFeedback = std::function<bool(std::size_t picked)>;

// Second-order UCB baseline: picks argmax Δ̂(m) + ε(m), then applies the
// regression-style update w += (s − Δ̂(m)) A_new⁻¹ Φ(m) with A += ΦΦᵀ.
// On incorrect feedback the target s is −1 with probability (1+α)/2 and +1
// otherwise; correct feedback always gives s = +1.
class ConfiditModel {
public:
    ConfiditModel(std::uint32_t dim, MatrixKind kind, double eta, double alpha,
                  std::uint64_t refresh_every = 10000)
        : w_(dim, 0.0), a_(kind, dim, refresh_every), eta_(eta), alpha_(alpha) {
        if (!(eta > 0.0)) throw std::invalid_argument("ConfiditModel: eta must be positive");
        if (!(alpha > -1.0 && alpha <= 1.0))
            throw std::invalid_argument("ConfiditModel: alpha must be in (-1, 1]");
    }

    const std::vector<double>& weights() const { return w_; }
    const SecondOrderMatrix& matrix() const { return a_; }
    double eta() const { return eta_; }
    void set_eta(double eta) {
        if (!(eta > 0.0)) throw std::invalid_argument("ConfiditModel: eta must be positive");
        eta_ = eta;
    }
    double alpha() const { return alpha_; }

    std::vector<double> score_items(std::span<const SparseVec> items) const {
        std::vector<double> s(items.size());
        for (std::size_t i = 0; i < items.size(); ++i)
            s[i] = dot(std::span<const double>(w_), items[i]);
        return s;
    }

    std::size_t step(std::span<const SparseVec> items, const IsBestFeedback& is_best, Rng& rng) {
        if (items.empty()) throw std::invalid_argument("confidit_step: no items");
        const auto scores = score_items(items);
        std::size_t pick = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < items.size(); ++i) {
            const double ucb = scores[i] + std::sqrt(eta_ * a_.inv_quad_form(items[i]));
            if (ucb > best) {
                best = ucb;
                pick = i;
            }
        }

        const bool correct = is_best(pick);
        const double s =
            correct ? 1.0 : (rng.bernoulli((1.0 + alpha_) / 2.0) ? -1.0 : 1.0);
        const double residual = s - scores[pick];

        const SparseVec& z = items[pick];
        if (a_.kind() == MatrixKind::diagonal) {
            a_.rank_one_update(z);
            for (const auto& [i, x] : z.entries()) w_[i] += residual * x / a_.diag_at(i);
        } else {
            a_.rank_one_update(z);
            const auto dir = a_.inv_apply(z);
            for (std::uint32_t i = 0; i < a_.dim(); ++i) w_[i] += residual * dir[i];
        }
        return pick;
    }

private:
    std::vector<double> w_;
    SecondOrderMatrix a_;
    double eta_;
    double alpha_;
};

// Perceptron-style bandit baseline with ε-greedy exploration. The sampled
// index k̃ follows P(k) = (1−γ)·1[k = ŷ] + γ/K; on feedback the update is
// the importance-weighted unbiased estimate of the full-information step:
//   w += 1[correct]·Φ(k̃)/P(k̃) − Φ(ŷ).
class BanditronModel {
public:
    BanditronModel(std::uint32_t dim, double gamma) : w_(dim, 0.0), gamma_(gamma) {
        if (!(gamma > 0.0 && gamma <= 0.5))
            throw std::invalid_argument("BanditronModel: gamma must be in (0, 0.5]");
    }

    const std::vector<double>& weights() const { return w_; }
    double gamma() const { return gamma_; }
    void set_gamma(double gamma) {
        if (!(gamma > 0.0 && gamma <= 0.5))
            throw std::invalid_argument("BanditronModel: gamma must be in (0, 0.5]");
        gamma_ = gamma;
    }

    std::vector<double> score_items(std::span<const SparseVec> items) const {
        std::vector<double> s(items.size());
        for (std::size_t i = 0; i < items.size(); ++i)
            s[i] = dot(std::span<const double>(w_), items[i]);
        return s;
    }

    static std::vector<double> pick_probabilities(std::size_t k, double gamma,
                                                  std::size_t greedy) {
        std::vector<double> p(k, gamma / static_cast<double>(k));
        p[greedy] += 1.0 - gamma;
        return p;
    }

    std::size_t step(std::span<const SparseVec> items, const IsBestFeedback& is_best, Rng& rng) {
        if (items.empty()) throw std::invalid_argument("banditron_step: no items");
        const auto scores = score_items(items);
        std::size_t greedy = 0;
        for (std::size_t i = 1; i < items.size(); ++i)
            if (scores[i] > scores[greedy]) greedy = i;

        const auto p = pick_probabilities(items.size(), gamma_, greedy);
        const double u = rng.real01();
        std::size_t sampled = items.size() - 1;  // covers residual rounding mass
        double cum = 0.0;
        for (std::size_t i = 0; i < items.size(); ++i) {
            cum += p[i];
            if (u < cum) {
                sampled = i;
                break;
            }
        }

        if (is_best(sampled)) add_scaled(w_, 1.0 / p[sampled], items[sampled]);
        add_scaled(w_, -1.0, items[greedy]);
        return sampled;
    }

private:
    std::vector<double> w_;
    double gamma_;
};

}  // namespace conquer
