#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "conquer/rng.hpp"
#include "conquer/sparse_vec.hpp"

namespace conquer {

// One interaction round: K unit-norm item vectors with their hidden rewards.
// Rewards are bounded in [−1, 1] and never shown to a learner directly.
struct Round {
    std::vector<SparseVec> items;
    std::vector<double> rewards;
};

inline void validate_round(const Round& r) {
    if (r.items.size() < 2) throw std::invalid_argument("Round: need K >= 2 items");
    if (r.items.size() != r.rewards.size())
        throw std::invalid_argument("Round: items/rewards size mismatch");
    for (double rw : r.rewards)
        if (!(std::fabs(rw) <= 1.0)) throw std::invalid_argument("Round: reward out of [-1,1]");
    for (const auto& it : r.items)
        if (std::fabs(it.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("Round: item not unit norm");
}

inline void check_reward(double r) {
    if (!(std::fabs(r) <= 1.0))
        throw std::invalid_argument("feedback: reward out of [-1,1]");
}

// P(y = +1) = (1 + ½(r_m − r_n)) / 2
inline double feedback_prob_positive(double r_m, double r_n) {
    check_reward(r_m);
    check_reward(r_n);
    return (1.0 + 0.5 * (r_m - r_n)) / 2.0;
}

inline int draw_feedback(double r_m, double r_n, Rng& rng) {
    return rng.bernoulli(feedback_prob_positive(r_m, r_n)) ? +1 : -1;
}

// Same law realized through a noisy feedback provider: each reward is first
// shifted to ±1 with bias (1±r)/2, the provider compares the shifted values,
// and ties break uniformly.
inline int draw_feedback_noisy_reward(double r_m, double r_n, Rng& rng) {
    check_reward(r_m);
    check_reward(r_n);
    const int shifted_m = rng.bernoulli((1.0 + r_m) / 2.0) ? +1 : -1;
    const int shifted_n = rng.bernoulli((1.0 + r_n) / 2.0) ? +1 : -1;
    if (shifted_m > shifted_n) return +1;
    if (shifted_m < shifted_n) return -1;
    return rng.bernoulli(0.5) ? +1 : -1;
}

// r_t = max_m r(t,m) − max{r(t,m_t), r(t,n_t)}; on a skip round the inner max
// is over the single pick.
inline double instantaneous_regret(const Round& round, std::size_t m,
                                   std::optional<std::size_t> n) {
    if (m >= round.rewards.size() || (n && *n >= round.rewards.size()))
        throw std::invalid_argument("instantaneous_regret: index out of range");
    const double best = *std::max_element(round.rewards.begin(), round.rewards.end());
    double got = round.rewards[m];
    if (n) got = std::max(got, round.rewards[*n]);
    return best - got;
}

// Normalized error of the first pick: (max reward − reward of m) / 2 ∈ [0,1].
// For star-derived rewards (stars−3)/2 this equals (max stars − stars_m)/4.
inline double round_error(const Round& round, std::size_t m) {
    if (m >= round.rewards.size()) throw std::invalid_argument("round_error: index out of range");
    const double best = *std::max_element(round.rewards.begin(), round.rewards.end());
    return (best - round.rewards[m]) / 2.0;
}

// q_t = max_m |r(t,m) − u·Φ(x_t,m)|
inline double approx_error_q(const Round& round, std::span<const double> u) {
    double nrm = 0.0;
    for (double x : u) nrm += x * x;
    if (nrm > 1.0 + 1e-9) throw std::invalid_argument("approx_error_q: ||u|| must be <= 1");
    double q = 0.0;
    for (std::size_t m = 0; m < round.items.size(); ++m)
        q = std::max(q, std::fabs(round.rewards[m] - dot(u, round.items[m])));
    return q;
}

// d_0(u, 0) = ½‖u‖² (A_0 is the identity)
inline double bregman_d0(std::span<const double> u) {
    double s = 0.0;
    for (double x : u) s += x * x;
    return 0.5 * s;
}

// η_t = d_0(u,0) + 2 Σ_{s≤t} q_s + 2 Σ_{s<t} h_s + 36 ln((t+4)/δ),
// h_s = z_sᵀ A_{s−1}⁻¹ z_s, given the prefix sums directly.
inline double theoretical_eta_from_sums(std::uint64_t t, double d0_u, double q_sum, double h_sum,
                                        double delta) {
    if (!(delta > 0.0 && delta <= 1.0))
        throw std::invalid_argument("theoretical_eta: delta must be in (0,1]");
    if (t == 0) throw std::invalid_argument("theoretical_eta: rounds start at t=1");
    return d0_u + 2.0 * q_sum + 2.0 * h_sum +
           36.0 * std::log((static_cast<double>(t) + 4.0) / delta);
}

// Same, from per-round histories. Histories shorter than the nominal sum
// length contribute what they have, so an empty history at t = 1 gives the
// bare log term.
inline double theoretical_eta(std::uint64_t t, double d0_u, std::span<const double> q_history,
                              std::span<const double> h_history, double delta) {
    if (!(delta > 0.0 && delta <= 1.0))
        throw std::invalid_argument("theoretical_eta: delta must be in (0,1]");
    if (t == 0) throw std::invalid_argument("theoretical_eta: rounds start at t=1");
    double q_sum = 0.0;
    const std::size_t nq = std::min<std::size_t>(q_history.size(), t);
    for (std::size_t i = 0; i < nq; ++i) q_sum += q_history[i];
    double h_sum = 0.0;
    const std::size_t nh = std::min<std::size_t>(h_history.size(), t - 1);
    for (std::size_t i = 0; i < nh; ++i) h_sum += h_history[i];
    return theoretical_eta_from_sums(t, d0_u, q_sum, h_sum, delta);
}

// Per-round log line. eps_t is the diagnostic width √(2 h_t η_t) of the
// round's update vector (0 on skip rounds); q_t the approximation error.
struct TraceRecord {
    std::uint64_t t = 0;
    std::size_t m = 0;
    std::optional<std::size_t> n;
    std::optional<int> y;
    double instantaneous_regret = 0.0;
    double error = 0.0;
    bool queried = true;
    double eps_t = 0.0;
    double q_t = 0.0;
};

// Diagnostic for the per-round bound r_t ≤ 2 q_t + 2 ε_t.
inline bool regret_bound_holds(const TraceRecord& rec, double eps_t, double q_t) {
    return rec.instantaneous_regret <= 2.0 * q_t + 2.0 * eps_t;
}

inline bool regret_bound_holds(const TraceRecord& rec) { return regret_bound_holds(rec, rec.eps_t, rec.q_t); }

enum class ItemDist {
    sphere,  // items uniform on the unit sphere
    basis,   // items are K distinct coordinate vectors (rewards = u components)
};

struct SynthSpec {
    std::uint32_t dim = 20;
    std::size_t k = 5;
    std::uint64_t horizon = 10000;  // advisory; the stream keeps producing
    std::vector<double> u;          // ground truth, ‖u‖ ≤ 1
    double noise = 0.0;             // uniform misspecification amplitude
    std::uint64_t seed = 0;
    ItemDist items = ItemDist::sphere;
};

// Builds a unit-norm u deterministically from a seed, scaled to u_norm.
inline std::vector<double> random_direction(std::uint32_t dim, std::uint64_t seed,
                                            double u_norm = 1.0) {
    Rng rng(mix_seed(seed));
    std::vector<double> u(dim);
    double nrm = 0.0;
    for (auto& x : u) {
        x = rng.normal();
        nrm += x * x;
    }
    nrm = std::sqrt(nrm);
    for (auto& x : u) x *= u_norm / nrm;
    return u;
}

// Deterministic round stream: r(t,m) = u·Φ + uniform(−noise, noise), clipped.
class SynthEnv {
public:
    explicit SynthEnv(SynthSpec spec) : spec_(std::move(spec)), rng_(mix_seed(spec_.seed)) {
        if (spec_.dim == 0) throw std::invalid_argument("SynthEnv: dim must be positive");
        if (spec_.k < 2) throw std::invalid_argument("SynthEnv: need K >= 2");
        if (spec_.u.size() != spec_.dim) throw std::invalid_argument("SynthEnv: u/dim mismatch");
        if (spec_.noise < 0.0) throw std::invalid_argument("SynthEnv: negative noise");
        if (spec_.items == ItemDist::basis && spec_.k > spec_.dim)
            throw std::invalid_argument("SynthEnv: basis items need K <= dim");
        double nrm = 0.0;
        for (double x : spec_.u) nrm += x * x;
        if (nrm > 1.0 + 1e-9) throw std::invalid_argument("SynthEnv: ||u|| must be <= 1");
    }

    const SynthSpec& spec() const { return spec_; }

    Round next() {
        Round r;
        r.items.reserve(spec_.k);
        r.rewards.reserve(spec_.k);
        if (spec_.items == ItemDist::sphere) {
            for (std::size_t m = 0; m < spec_.k; ++m) {
                std::vector<double> v(spec_.dim);
                double nrm = 0.0;
                for (auto& x : v) {
                    x = rng_.normal();
                    nrm += x * x;
                }
                nrm = std::sqrt(nrm);
                for (auto& x : v) x /= nrm;
                r.items.push_back(SparseVec::from_dense(v));
            }
        } else {
            // K distinct coordinates, order shuffled per round
            std::vector<std::uint32_t> coords(spec_.dim);
            for (std::uint32_t i = 0; i < spec_.dim; ++i) coords[i] = i;
            for (std::size_t i = 0; i < spec_.k; ++i) {
                const std::size_t j = i + rng_.below(spec_.dim - i);
                std::swap(coords[i], coords[j]);
                r.items.push_back(SparseVec::unit(spec_.dim, coords[i]));
            }
        }
        for (std::size_t m = 0; m < spec_.k; ++m) {
            double reward = dot(spec_.u, r.items[m]);
            if (spec_.noise > 0.0) reward += rng_.uniform(-spec_.noise, spec_.noise);
            r.rewards.push_back(std::clamp(reward, -1.0, 1.0));
        }
        return r;
    }

private:
    SynthSpec spec_;
    Rng rng_;
};

}  // namespace conquer
