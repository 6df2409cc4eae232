// Weak-label kernels: distance transform, seeding, watershed, components,
// morphology, hulls and circle voting, each checked against the literal
// reference implementations in oracles.cpp plus hand-built cases for the
// documented edge behavior.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "echoseg/weaklabel.hpp"
#include "oracles.hpp"

using namespace echoseg;

TEST_CASE("squared distance transform equals the exhaustive scan") {
    Rng rng(101);
    for (int i = 0; i < 150; ++i) {
        const int w = rng.uniform_int(4, 48), h = rng.uniform_int(4, 48);
        const double fill = 0.2 + 0.6 * rng.uniform();
        const BinaryMask m = i % 3 == 0 ? oracle::random_blobs(rng, w, h, 3)
                                        : oracle::random_mask(rng, w, h, fill);
        const auto got = squared_distance_transform(m);
        const auto want = oracle::sq_edt(m);
        REQUIRE(got == want);
    }
}

TEST_CASE("distance transform is zero outside the mask") {
    Rng rng(103);
    const BinaryMask m = oracle::random_mask(rng, 20, 20, 0.5);
    const auto d = squared_distance_transform(m);
    for (int r = 0; r < 20; ++r)
        for (int c = 0; c < 20; ++c)
            if (!m.at(r, c)) CHECK(d[r * 20 + c] == 0.0);
}

TEST_CASE("distance seeds equal the window-maximum reference") {
    Rng rng(107);
    for (int i = 0; i < 150; ++i) {
        const int w = rng.uniform_int(8, 48), h = rng.uniform_int(8, 48);
        const BinaryMask m = oracle::random_blobs(rng, w, h, 4);
        const int min_d = rng.uniform_int(2, 10);
        const auto got = distance_seeds(m, min_d);
        const auto want = oracle::distance_seeds(m, min_d);
        REQUIRE(got == want);
    }
}

TEST_CASE("distance seeds respect the separation radius") {
    Rng rng(109);
    for (int i = 0; i < 50; ++i) {
        const BinaryMask m = oracle::random_blobs(rng, 40, 40, 5);
        const int min_d = rng.uniform_int(3, 12);
        const auto seeds = distance_seeds(m, min_d);
        for (std::size_t a = 0; a < seeds.size(); ++a) {
            CHECK(m.at(seeds[a].row, seeds[a].col));
            for (std::size_t b = a + 1; b < seeds.size(); ++b) {
                const double dr = seeds[a].row - seeds[b].row;
                const double dc = seeds[a].col - seeds[b].col;
                CHECK(dr * dr + dc * dc >= static_cast<double>(min_d) * min_d);
            }
        }
    }
}

TEST_CASE("empty mask yields no seeds") {
    CHECK(distance_seeds(BinaryMask::zeros(10, 10, 0.5), 5).empty());
}

TEST_CASE("watershed basins equal the linear-scan reference flood") {
    Rng rng(113);
    int nontrivial = 0;
    for (int i = 0; i < 120; ++i) {
        const int w = rng.uniform_int(8, 40), h = rng.uniform_int(8, 40);
        const BinaryMask m = oracle::random_blobs(rng, w, h, 4);
        const auto seeds = distance_seeds(m, rng.uniform_int(4, 10));
        if (seeds.empty()) continue;
        const BasinMap got = watershed(m, seeds);
        const BasinMap want = oracle::watershed(m, seeds);
        REQUIRE(got.count == want.count);
        REQUIRE(got.basin == want.basin);
        if (seeds.size() > 1) ++nontrivial;
    }
    CHECK(nontrivial > 20);
}

TEST_CASE("watershed labels every reachable mask pixel with its seed id") {
    Rng rng(127);
    const BinaryMask m = oracle::disk_mask(40, 40, 20, 20, 15);
    const auto seeds = distance_seeds(m, 6);
    REQUIRE(!seeds.empty());
    const BasinMap b = watershed(m, seeds);
    for (std::size_t i = 0; i < seeds.size(); ++i)
        CHECK(b.at(seeds[i].row, seeds[i].col) == static_cast<std::int32_t>(i + 1));
    for (int r = 0; r < 40; ++r)
        for (int c = 0; c < 40; ++c) {
            if (m.at(r, c)) {
                CHECK(b.at(r, c) >= 1);
                CHECK(b.at(r, c) <= static_cast<int>(seeds.size()));
            } else {
                CHECK(b.at(r, c) == 0);
            }
        }
    const BinaryMask first = b.mask_of(1, 0.5);
    CHECK(first.at(seeds[0].row, seeds[0].col));
}

TEST_CASE("watershed rejects bad seed sets") {
    const BinaryMask m = oracle::disk_mask(20, 20, 10, 10, 6);
    CHECK_THROWS_WITH_AS(watershed(m, {}), "watershed unseeded", std::invalid_argument);
    CHECK_THROWS_WITH_AS(watershed(m, {{0, 0}}), "watershed: seed outside mask",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(watershed(m, {{10, 10}, {10, 10}}), "watershed: duplicate seed",
                         std::invalid_argument);
}

TEST_CASE("connected components equal the union-find reference") {
    Rng rng(131);
    for (int i = 0; i < 200; ++i) {
        const int w = rng.uniform_int(4, 48), h = rng.uniform_int(4, 48);
        const BinaryMask m = i % 2 == 0 ? oracle::random_mask(rng, w, h, 0.25 + 0.5 * rng.uniform())
                                        : oracle::random_blobs(rng, w, h, 5);
        const auto got = connected_components(m);
        const auto want = oracle::components8(m);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            REQUIRE(got[k].pixels == want[k].pixels);
            CHECK(got[k].min_row == want[k].min_row);
            CHECK(got[k].max_row == want[k].max_row);
            CHECK(got[k].min_col == want[k].min_col);
            CHECK(got[k].max_col == want[k].max_col);
        }
        // 8-connectivity can only merge what 4-connectivity separates.
        CHECK(got.size() <= oracle::component_count4(m));
    }
}

TEST_CASE("component masks round trip") {
    Rng rng(137);
    const BinaryMask m = oracle::random_blobs(rng, 30, 30, 3);
    const auto comps = connected_components(m);
    std::size_t total = 0;
    for (const auto& comp : comps) {
        const BinaryMask back = mask_from_component(comp, 30, 30, 0.5);
        CHECK(back.count() == comp.size());
        for (auto p : comp.pixels) CHECK(back.bits[static_cast<std::size_t>(p)] != 0);
        total += comp.size();
    }
    CHECK(total == m.count());
}

TEST_CASE("binarize_clean keeps the dark pool, drops crumbs, fills holes") {
    Raster img = oracle::const_raster(40, 40, 0.5f);
    // Dark pool with one bright speck inside, plus a tiny dark crumb.
    for (int r = 0; r < 40; ++r)
        for (int c = 0; c < 40; ++c) {
            const double d = std::hypot(r - 18.0, c - 20.0);
            if (d <= 9.0) img.at(r, c) = 0.02f;
        }
    img.at(18, 20) = 0.9f;
    img.at(35, 4) = 0.02f;

    BinarizeParams params;
    params.threshold = 0.1;
    params.min_region_px = 50;
    params.max_hole_px = 10;
    const auto pool = binarize_clean(img, params);
    REQUIRE(pool.has_value());
    CHECK(pool->at(18, 20));        // hole filled
    CHECK(pool->at(18, 26));        // pool kept
    CHECK_FALSE(pool->at(35, 4));   // crumb dropped
    CHECK_FALSE(pool->at(2, 2));    // tissue stays out

    const Raster bright = oracle::const_raster(40, 40, 0.5f);
    CHECK_FALSE(binarize_clean(bright, params).has_value());
}

TEST_CASE("dilate and erode equal brute disk scans") {
    Rng rng(139);
    for (int i = 0; i < 120; ++i) {
        const int w = rng.uniform_int(6, 40), h = rng.uniform_int(6, 40);
        const BinaryMask m = oracle::random_blobs(rng, w, h, 3);
        const int radius = rng.uniform_int(0, 5);
        const int r2 = radius * radius;

        const BinaryMask dil = morphology(m, MorphOp::dilate, radius);
        const BinaryMask ero = morphology(m, MorphOp::erode, radius);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                bool any = false, all = true;
                for (int dr = -radius; dr <= radius; ++dr)
                    for (int dc = -radius; dc <= radius; ++dc) {
                        if (dr * dr + dc * dc > r2) continue;
                        const int rr = r + dr, cc = c + dc;
                        const bool inside = m.in_bounds(rr, cc) && m.at(rr, cc);
                        any = any || inside;
                        all = all && inside;
                    }
                REQUIRE(dil.at(r, c) == any);
                REQUIRE(ero.at(r, c) == all);
            }
    }
}

TEST_CASE("morphology radius zero is the identity") {
    Rng rng(149);
    const BinaryMask m = oracle::random_mask(rng, 25, 25, 0.5);
    CHECK(morphology(m, MorphOp::dilate, 0).bits == m.bits);
    CHECK(morphology(m, MorphOp::erode, 0).bits == m.bits);
}

TEST_CASE("fill_holes uses 4-connected background flooding") {
    BinaryMask m = BinaryMask::zeros(9, 9, 0.5);
    // A ring whose cavity touches the outside only through a diagonal gap:
    // diagonal adjacency does not connect 4-connected background, so the
    // cavity still counts as a hole.
    for (int r = 2; r <= 6; ++r)
        for (int c = 2; c <= 6; ++c)
            if (r == 2 || r == 6 || c == 2 || c == 6) m.set(r, c, true);
    m.set(4, 4, false);
    m.set(2, 2, false);  // open one corner: cavity and outside meet diagonally

    const BinaryMask filled = morphology(m, MorphOp::fill_holes, 0);
    CHECK(filled.at(4, 4));
    CHECK(filled.at(3, 3));
    CHECK_FALSE(filled.at(2, 2));  // border-reachable background stays
    CHECK_FALSE(filled.at(0, 0));
}

TEST_CASE("convex hull equals the gift-wrapping reference") {
    Rng rng(151);
    int checked = 0;
    for (int i = 0; i < 200; ++i) {
        const int w = rng.uniform_int(6, 48), h = rng.uniform_int(6, 48);
        const BinaryMask m = i % 2 == 0 ? oracle::random_blobs(rng, w, h, 3)
                                        : oracle::random_mask(rng, w, h, 0.1 + 0.3 * rng.uniform());
        if (m.empty() || oracle::all_collinear(m)) continue;
        const BinaryMask got = morphology(m, MorphOp::convex_hull, 0);
        const BinaryMask want = oracle::convex_hull(m);
        REQUIRE(got.bits == want.bits);
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("convex hull contains its input and is idempotent") {
    Rng rng(157);
    const BinaryMask m = oracle::random_blobs(rng, 40, 40, 4);
    const BinaryMask hull = morphology(m, MorphOp::convex_hull, 0);
    for (int r = 0; r < 40; ++r)
        for (int c = 0; c < 40; ++c)
            if (m.at(r, c)) CHECK(hull.at(r, c));
    const BinaryMask again = morphology(hull, MorphOp::convex_hull, 0);
    CHECK(again.bits == hull.bits);
}

TEST_CASE("degenerate hulls stay on their line") {
    for (int variant = 0; variant < 3; ++variant) {
        BinaryMask m = BinaryMask::zeros(20, 20, 0.5);
        if (variant == 0) m.set(7, 7, true);                               // single pixel
        if (variant == 1)
            for (int c = 3; c <= 15; c += 4) m.set(5, c, true);            // horizontal gaps
        if (variant == 2)
            for (int k = 0; k <= 4; ++k) m.set(3 + 2 * k, 4 + 3 * k, true);  // sparse diagonal
        const BinaryMask hull = morphology(m, MorphOp::convex_hull, 0);
        for (int r = 0; r < 20; ++r)
            for (int c = 0; c < 20; ++c)
                if (m.at(r, c)) CHECK(hull.at(r, c));
        CHECK(oracle::all_collinear(hull));
        CHECK(hull.count() >= m.count());
    }
}

TEST_CASE("edge ring is the hull dilation minus the hull erosion") {
    Rng rng(163);
    for (int i = 0; i < 40; ++i) {
        const BinaryMask m = oracle::random_blobs(rng, 40, 40, 2);
        if (morphology(m, MorphOp::convex_hull, 0).count() < 9) continue;
        const int d = rng.uniform_int(1, 4);
        const int e = rng.uniform_int(0, d);
        const BinaryMask ring = edge_ring(m, d, e);
        const BinaryMask hull = morphology(m, MorphOp::convex_hull, 0);
        const BinaryMask outer = morphology(hull, MorphOp::dilate, d);
        const BinaryMask inner = morphology(hull, MorphOp::erode, e);
        for (std::size_t k = 0; k < ring.bits.size(); ++k)
            REQUIRE((ring.bits[k] != 0) == (outer.bits[k] != 0 && inner.bits[k] == 0));
    }
}

TEST_CASE("edge ring rejects degenerate hulls and inverted radii") {
    BinaryMask tiny = BinaryMask::zeros(20, 20, 0.5);
    tiny.set(5, 5, true);
    tiny.set(5, 9, true);
    CHECK_THROWS_AS(edge_ring(tiny, 2, 1), std::invalid_argument);

    const BinaryMask disk = oracle::disk_mask(30, 30, 15, 15, 8);
    CHECK_THROWS_AS(edge_ring(disk, 1, 2), std::invalid_argument);
}

TEST_CASE("hough votes equal the candidate-centric recount") {
    Rng rng(167);
    for (int i = 0; i < 60; ++i) {
        Raster edges = oracle::const_raster(36, 36, 0.0f);
        // Sparse random edge energy plus one noisy ring.
        for (int k = 0; k < 160; ++k)
            edges.at(rng.uniform_int(0, 35), rng.uniform_int(0, 35)) =
                static_cast<float>(rng.uniform());
        const int cr = rng.uniform_int(12, 24), cc = rng.uniform_int(12, 24);
        const int rad = rng.uniform_int(5, 10);
        for (int a = 0; a < 220; ++a) {
            const double th = 2.0 * 3.14159265358979323846 * a / 220.0;
            const int r = cr + static_cast<int>(std::lround(rad * std::sin(th)));
            const int c = cc + static_cast<int>(std::lround(rad * std::cos(th)));
            if (r >= 0 && r < 36 && c >= 0 && c < 36) edges.at(r, c) = 1.0f;
        }

        HoughParams p;
        p.radius_min_px = 4;
        p.radius_max_px = 11;
        p.edge_percentile = 80.0;
        p.vote_floor_fraction = i % 2 == 0 ? 0.5 : 0.3;
        p.min_center_distance_px = i % 3 == 0 ? 6.0 : 400.0;
        const auto got = hough_circles(edges, p);
        const auto want = oracle::hough(edges, p);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            CHECK(got[k].center_row == want[k].center_row);
            CHECK(got[k].center_col == want[k].center_col);
            CHECK(got[k].radius == want[k].radius);
            CHECK(got[k].votes == want[k].votes);
        }
    }
}

TEST_CASE("hough finds a clean circle exactly") {
    Raster edges = oracle::const_raster(64, 64, 0.0f);
    const int cr = 30, cc = 33, rad = 12;
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c) {
            const double d = std::hypot(r - static_cast<double>(cr), c - static_cast<double>(cc));
            if (std::llround(d) == rad) edges.at(r, c) = 1.0f;
        }
    HoughParams p;
    p.radius_min_px = 6;
    p.radius_max_px = 20;
    const auto circles = hough_circles(edges, p);
    REQUIRE(!circles.empty());
    CHECK(circles[0].center_row == cr);
    CHECK(circles[0].center_col == cc);
    CHECK(circles[0].radius == rad);
}

TEST_CASE("hough returns nothing for flat input") {
    const Raster flat = oracle::const_raster(32, 32, 0.5f);
    CHECK(hough_circles(flat, HoughParams{}).empty());
}
