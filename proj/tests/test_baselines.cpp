#include <doctest.h>

#include <cmath>
#include <vector>

#include "conquer/baselines.hpp"
#include "conquer/rng.hpp"

using namespace conquer;

namespace {

std::vector<SparseVec> basis_items(std::uint32_t dim, std::size_t k) {
    std::vector<SparseVec> items;
    for (std::size_t i = 0; i < k; ++i)
        items.push_back(SparseVec::unit(dim, static_cast<std::uint32_t>(i)));
    return items;
}

SparseVec random_unit(std::uint32_t dim, Rng& rng) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    return SparseVec::from_dense(v).normalized();
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("confidit picks the lowest index from a fresh model") {
    ConfiditModel m(4, MatrixKind::full, 1.0, 0.5);
    Rng rng(1);
    const auto items = basis_items(4, 3);
    const auto pick = m.step(items, [](std::size_t) { return true; }, rng);
    CHECK(pick == 0);
}

TEST_CASE("confidit degenerate alpha") {
    Rng rng(2);
    const auto items = basis_items(3, 3);

    // alpha = 1 and incorrect feedback: s = −1 always, so from w = 0 the
    // residual is −1 and the picked weight goes negative every time.
    ConfiditModel m(3, MatrixKind::diagonal, 1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const auto pick = m.step(items, [](std::size_t) { return false; }, rng);
        CHECK(m.weights()[pick] < 0.0);
    }

    // always-correct feedback gives s = +1 deterministically
    ConfiditModel c(3, MatrixKind::diagonal, 1.0, 1.0);
    for (int t = 0; t < 20; ++t) c.step(items, [](std::size_t) { return true; }, rng);
    for (double w : c.weights()) CHECK(w >= 0.0);
}

TEST_CASE("confidit zero residual leaves the weights untouched") {
    Rng rng(3);
    const std::vector<SparseVec> only{SparseVec::unit(3, 0)};

    ConfiditModel m(3, MatrixKind::full, 1e-12, 0.5);
    m.step(only, [](std::size_t) { return true; }, rng);  // w += (1 − 0)·A⁻¹e1
    CHECK(m.weights()[0] > 0.0);

    // repeated correct feedback drives the score to 1, and the step size is
    // exactly |1 − score| scaled by the shrinking inverse
    ConfiditModel exact(2, MatrixKind::full, 1e-12, 0.5);
    const std::vector<SparseVec> item{SparseVec::unit(2, 0)};
    for (int t = 0; t < 200; ++t) exact.step(item, [](std::size_t) { return true; }, rng);
    const double score = exact.score_items(item)[0];
    const auto before = exact.weights();
    exact.step(item, [](std::size_t) { return true; }, rng);
    CHECK(std::fabs(exact.weights()[0] - before[0]) <= std::fabs(1.0 - score));
    CHECK(std::fabs(1.0 - score) < 1e-2);
}

TEST_CASE("confidit rejects bad parameters") {
    CHECK_THROWS_AS(ConfiditModel(3, MatrixKind::full, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(ConfiditModel(3, MatrixKind::full, 1.0, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(ConfiditModel(3, MatrixKind::full, 1.0, 1.5), std::invalid_argument);
}

TEST_CASE("banditron pick probabilities") {
    const auto p = BanditronModel::pick_probabilities(5, 0.5, 2);
    CHECK(p[2] == doctest::Approx(0.6));
    for (std::size_t i = 0; i < 5; ++i)
        if (i != 2) CHECK(p[i] == doctest::Approx(0.1));

    double total = 0.0;
    for (double v : p) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));

    // gamma → 0 limit: the sampled index is the greedy one almost surely
    BanditronModel m(4, 1e-9);
    Rng rng(5);
    const auto items = basis_items(4, 4);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> w = m.weights();
        std::size_t greedy = 0;
        for (std::size_t i = 1; i < 4; ++i)
            if (w[i] > w[greedy]) greedy = i;
        CHECK(m.step(items, [](std::size_t) { return false; }, rng) == greedy);
    }
}

TEST_CASE("banditron sampling frequencies match the distribution") {
    BanditronModel probe(5, 0.2);
    Rng rng(7);
    const auto items = basis_items(5, 5);

    // freeze the model by always reporting incorrect (only −Φ(greedy) moves w);
    // instead track counts with a fresh model per draw so P stays at its w=0 value
    std::vector<int> counts(5, 0);
    const int n = 100000;
    for (int t = 0; t < n; ++t) {
        BanditronModel m(5, 0.2);
        counts[m.step(items, [](std::size_t) { return false; }, rng)]++;
    }
    const auto p = BanditronModel::pick_probabilities(5, 0.2, 0);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(std::fabs(static_cast<double>(counts[i]) / n - p[i]) <= 0.01);
}

TEST_CASE("banditron update is the importance-weighted estimate") {
    BanditronModel m(6, 0.3);
    Rng rng(11);
    const auto items = basis_items(6, 3);
    const auto picked = m.step(items, [](std::size_t) { return true; }, rng);
    const auto p = BanditronModel::pick_probabilities(3, 0.3, 0);
    // w = Φ(picked)/P(picked) − Φ(greedy=0)
    std::vector<double> expect(6, 0.0);
    expect[picked] += 1.0 / p[picked];
    expect[0] -= 1.0;
    for (std::size_t i = 0; i < 6; ++i) CHECK(m.weights()[i] == doctest::Approx(expect[i]));
}

TEST_CASE("both baselines stay finite over long random runs") {
    Rng rng(13);
    ConfiditModel cf(8, MatrixKind::diagonal, 0.5, 0.5);
    BanditronModel bt(8, 0.2);
    for (int t = 0; t < 2000; ++t) {
        std::vector<SparseVec> items;
        for (int i = 0; i < 4; ++i) items.push_back(random_unit(8, rng));
        const auto fb = [&](std::size_t) { return rng.bernoulli(0.5); };
        cf.step(items, fb, rng);
        bt.step(items, fb, rng);
    }
    CHECK(cf.weights().size() == 8);
    CHECK(bt.weights().size() == 8);
    for (double w : cf.weights()) CHECK(std::isfinite(w));
    for (double w : bt.weights()) CHECK(std::isfinite(w));

    CHECK_THROWS_AS(BanditronModel(4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(BanditronModel(4, 0.7), std::invalid_argument);
}

}  // TEST_SUITE
