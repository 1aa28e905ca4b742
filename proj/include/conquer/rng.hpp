#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace conquer {

// All randomness flows through this wrapper so that streams are reproducible
// across platforms: mt19937_64 output is pinned by the standard, while the
// std <random> distributions are not. Mappings below are implemented by hand.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1), 53-bit resolution
    double real01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * real01(); }

    // unbiased integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x >= threshold) return x % n;
        }
    }

    bool bernoulli(double p) { return real01() < p; }

    // standard normal, Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = real01();
        while (u1 <= 0.0) u1 = real01();
        const double u2 = real01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// splitmix64 finalizer, used to derive independent child seeds
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    return mix_seed(base ^ mix_seed(salt));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t s1, std::uint64_t s2) {
    return derive_seed(derive_seed(base, s1), s2);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t s1, std::uint64_t s2,
                                 std::uint64_t s3) {
    return derive_seed(derive_seed(base, s1, s2), s3);
}

}  // namespace conquer
