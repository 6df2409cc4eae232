// Statistics layer: overlap, correlation, agreement, rank tests and the
// seeded bootstrap, cross-checked against the textbook references in
// oracles.cpp and hand-computed values.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "echoseg/stats.hpp"
#include "oracles.hpp"

using namespace echoseg;

namespace {

std::vector<double> random_series(Rng& rng, int n, bool with_ties) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v)
        x = with_ties ? static_cast<double>(rng.uniform_int(0, 5)) : rng.uniform();
    return v;
}

}  // namespace

TEST_CASE("dice handles identity, disjoint and empty masks") {
    const BinaryMask a = oracle::disk_mask(30, 30, 10, 10, 5);
    const BinaryMask b = oracle::disk_mask(30, 30, 22, 22, 4);
    CHECK(dice(a, a) == 1.0);
    CHECK(dice(a, b) == 0.0);
    const BinaryMask empty = BinaryMask::zeros(30, 30, 0.5);
    CHECK(dice(empty, empty) == 1.0);
    CHECK(dice(a, empty) == 0.0);

    const BinaryMask other = BinaryMask::zeros(20, 30, 0.5);
    CHECK_THROWS_AS(dice(a, other), std::invalid_argument);
}

TEST_CASE("dice is symmetric and matches the counting reference") {
    Rng rng(401);
    for (int i = 0; i < 300; ++i) {
        const int w = rng.uniform_int(4, 40), h = rng.uniform_int(4, 40);
        const BinaryMask a = oracle::random_mask(rng, w, h, rng.uniform());
        const BinaryMask b = oracle::random_mask(rng, w, h, rng.uniform());
        const double d = dice(a, b);
        CHECK(d == oracle::dice(a, b));
        CHECK(d == dice(b, a));
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
    }
}

TEST_CASE("spearman matches the explicit rank construction") {
    Rng rng(409);
    for (int i = 0; i < 400; ++i) {
        const int n = rng.uniform_int(3, 60);
        const auto x = random_series(rng, n, i % 2 == 0);
        const auto y = random_series(rng, n, i % 3 == 0);
        const auto got = spearman(x, y);
        const auto want = oracle::spearman(x, y);
        REQUIRE(got.has_value() == want.has_value());
        if (got) CHECK(*got == doctest::Approx(*want).epsilon(1e-9));
    }
}

TEST_CASE("spearman contract cases") {
    CHECK(*spearman({1, 2, 3}, {10, 20, 30}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*spearman({1, 2, 3}, {30, 20, 10}) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK_FALSE(spearman({1, 1, 1}, {1, 2, 3}).has_value());
    CHECK_THROWS_AS(spearman({1, 2}, {1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(spearman({1, 2, 3}, {1, 2}), std::invalid_argument);
}

TEST_CASE("r_squared equals the regression defect of the fitted line") {
    Rng rng(419);
    for (int i = 0; i < 400; ++i) {
        const int n = rng.uniform_int(3, 60);
        const auto x = random_series(rng, n, i % 4 == 0);
        auto y = random_series(rng, n, false);
        if (i % 2 == 0)
            for (int k = 0; k < n; ++k) y[k] = 0.3 * x[k] + 0.2 * y[k];  // correlated case
        const auto got = r_squared(x, y);
        const auto want = oracle::r_squared(x, y);
        REQUIRE(got.has_value() == want.has_value());
        if (got) CHECK(*got == doctest::Approx(*want).epsilon(1e-9));
    }
    CHECK(*r_squared({1, 2, 3, 4}, {3, 5, 7, 9}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(r_squared({2, 2, 2}, {1, 2, 3}).has_value());
}

TEST_CASE("bland-altman bias and limits of agreement") {
    const BlandAltman ba = bland_altman({3, 5, 7}, {2, 3, 4});
    CHECK(ba.bias == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(ba.loa_half == doctest::Approx(1.96).epsilon(1e-12));

    Rng rng(421);
    for (int i = 0; i < 300; ++i) {
        const int n = rng.uniform_int(2, 50);
        const auto x = random_series(rng, n, false);
        const auto y = random_series(rng, n, false);
        const BlandAltman got = bland_altman(x, y);
        const BlandAltman want = oracle::bland_altman(x, y);
        CHECK(got.bias == doctest::Approx(want.bias).epsilon(1e-9));
        CHECK(got.loa_half == doctest::Approx(want.loa_half).epsilon(1e-9));
    }
    CHECK_THROWS_AS(bland_altman({1}, {1}), std::invalid_argument);
}

TEST_CASE("cohen kappa matches the confusion-table reference") {
    Rng rng(431);
    for (int i = 0; i < 400; ++i) {
        const int n = rng.uniform_int(2, 80);
        std::vector<int> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
        const int k = rng.uniform_int(1, 4);
        for (int j = 0; j < n; ++j) {
            a[j] = rng.uniform_int(0, k);
            b[j] = rng.uniform() < 0.6 ? a[j] : rng.uniform_int(0, k);
        }
        const auto got = cohen_kappa(a, b);
        const auto want = oracle::cohen_kappa(a, b);
        REQUIRE(got.has_value() == want.has_value());
        if (got) CHECK(*got == doctest::Approx(*want).epsilon(1e-9));
    }
    CHECK(*cohen_kappa({0, 1, 0, 1}, {0, 1, 0, 1}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(cohen_kappa({1, 1, 1}, {1, 1, 1}).has_value());
}

TEST_CASE("mann-whitney u equals the pair count") {
    Rng rng(433);
    for (int i = 0; i < 400; ++i) {
        const int nx = rng.uniform_int(1, 40), ny = rng.uniform_int(1, 40);
        const auto x = random_series(rng, nx, i % 2 == 0);
        const auto y = random_series(rng, ny, i % 2 == 0);
        const MannWhitney mw = mann_whitney_u(x, y);
        CHECK(mw.u == doctest::Approx(oracle::mwu_pair_count(x, y)).epsilon(1e-9));
        const MannWhitney flipped = mann_whitney_u(y, x);
        CHECK(mw.u + flipped.u ==
              doctest::Approx(static_cast<double>(nx) * ny).epsilon(1e-9));
        CHECK(mw.p_two_sided == doctest::Approx(flipped.p_two_sided).epsilon(1e-9));
        CHECK(mw.p_two_sided >= 0.0);
        CHECK(mw.p_two_sided <= 1.0);
    }
}

TEST_CASE("mann-whitney separates shifted samples and ties out flat ones") {
    std::vector<double> lo, hi, flat_x, flat_y;
    for (int i = 0; i < 30; ++i) {
        lo.push_back(i * 0.01);
        hi.push_back(1.0 + i * 0.01);
        flat_x.push_back(5.0);
        flat_y.push_back(5.0);
    }
    const MannWhitney sep = mann_whitney_u(hi, lo);
    CHECK(sep.u == 900.0);
    CHECK(sep.p_two_sided < 1e-6);
    const MannWhitney tied = mann_whitney_u(flat_x, flat_y);
    CHECK(tied.u == 450.0);
    CHECK(tied.p_two_sided == 1.0);
}

TEST_CASE("classification is strict beyond the cutoff") {
    const auto below = classify_abnormal({49.9, 50.0, 50.1}, 50.0, false);
    CHECK(below == std::vector<std::uint8_t>{1, 0, 0});
    const auto above = classify_abnormal({49.9, 50.0, 50.1}, 50.0, true);
    CHECK(above == std::vector<std::uint8_t>{0, 0, 1});
}

TEST_CASE("binary agreement counts the confusion table") {
    const std::vector<std::uint8_t> pred{1, 1, 0, 0, 1, 0};
    const std::vector<std::uint8_t> ref{1, 0, 0, 1, 1, 0};
    const BinaryAgreement ba = binary_agreement(pred, ref);
    CHECK(ba.tp == 2);
    CHECK(ba.fp == 1);
    CHECK(ba.fn == 1);
    CHECK(ba.tn == 2);
    CHECK(ba.accuracy == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
    REQUIRE(ba.kappa.has_value());
    std::vector<int> pi(pred.begin(), pred.end()), ri(ref.begin(), ref.end());
    CHECK(*ba.kappa == doctest::Approx(*oracle::cohen_kappa(pi, ri)).epsilon(1e-12));
}

TEST_CASE("bootstrap is seeded, reproducible and degenerate on constants") {
    Rng rng(443);
    std::vector<double> values;
    for (int i = 0; i < 25; ++i) values.push_back(rng.uniform() * 10.0);

    const auto a = bootstrap_ci(values, 500, 0.95, 7);
    const auto b = bootstrap_ci(values, 500, 0.95, 7);
    CHECK(a == b);
    const auto c = bootstrap_ci(values, 500, 0.95, 8);
    CHECK(a != c);

    CHECK(a.first <= a.second);
    const double m = mean_of(values);
    CHECK(a.first <= m);
    CHECK(a.second >= m);

    const std::vector<double> flat(10, 4.2);
    const auto [lo, hi] = bootstrap_ci(flat, 200, 0.95, 1);
    CHECK(lo == 4.2);
    CHECK(hi == 4.2);

    CHECK_THROWS_AS(bootstrap_ci({1.0}, 100, 0.95, 0), std::invalid_argument);
    CHECK_THROWS_AS(bootstrap_ci({}, 100, 0.95, 0), std::invalid_argument);
}

TEST_CASE("bootstrap resamples draw from per-index derived streams") {
    // Reconstruct the documented scheme: resample i uses Rng(derive_seed
    // (seed, i)), takes n uniform draws and averages; the interval is the
    // linear-interpolated quantile pair of the sorted means.
    const std::vector<double> values{1.0, 2.0, 3.0, 4.0, 5.0};
    const int resamples = 64;
    const std::uint64_t seed = 123;
    std::vector<double> means;
    for (int i = 0; i < resamples; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        double acc = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k)
            acc += values[rng.uniform_index(values.size())];
        means.push_back(acc / static_cast<double>(values.size()));
    }
    std::sort(means.begin(), means.end());
    auto quantile = [&](double q) {
        const double pos = q * (means.size() - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        if (i + 1 >= means.size()) return means.back();
        const double frac = pos - static_cast<double>(i);
        return means[i] * (1.0 - frac) + means[i + 1] * frac;
    };
    const auto got = bootstrap_ci(values, resamples, 0.90, seed);
    CHECK(got.first == doctest::Approx(quantile(0.05)).epsilon(1e-12));
    CHECK(got.second == doctest::Approx(quantile(0.95)).epsilon(1e-12));
}
