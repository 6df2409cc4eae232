// Synthetic ultrasound generator: deterministic rendering, truth geometry
// that tracks the continuous ellipse parameters over the cycle, acquisition
// degradations, and the closed-form study measurements.

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "echoseg/common.hpp"
#include "echoseg/measure.hpp"
#include "echoseg/phantom.hpp"
#include "oracles.hpp"

using namespace echoseg;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPxAreaCm2 = 0.0025;  // (0.5 mm)^2

int count_class(const LabelMap& truth, Chamber cls) {
    int n = 0;
    for (int r = 0; r < truth.height; ++r)
        for (int c = 0; c < truth.width; ++c)
            if (truth.at(r, c) == cls) ++n;
    return n;
}

double class_area_cm2(const LabelMap& truth, Chamber cls) {
    return count_class(truth, cls) * kPxAreaCm2;
}

PhantomSpec a2c_spec(std::uint64_t seed, int frames = 4) {
    StudyPhantomParams p;
    p.frames_per_cycle = frames;
    p.seed = seed;
    return make_view_spec(View::a2c, p);
}

}  // namespace

TEST_CASE("phantom rendering is deterministic per seed") {
    const PhantomSpec spec = a2c_spec(17);
    const PhantomOutput a = generate(spec);
    const PhantomOutput b = generate(spec);
    REQUIRE(a.frames.size() == 4);
    REQUIRE(a.truth.size() == 4);
    for (std::size_t t = 0; t < a.frames.size(); ++t) {
        CHECK(a.frames[t].pixels == b.frames[t].pixels);
        CHECK(a.truth[t].classes == b.truth[t].classes);
    }
    PhantomSpec other = spec;
    other.seed = spec.seed + 1;
    const PhantomOutput c = generate(other);
    CHECK(a.frames[0].pixels != c.frames[0].pixels);
    CHECK(a.truth[0].classes == c.truth[0].classes);  // geometry ignores the seed
    CHECK(a.frames[0].pixels != a.frames[1].pixels);
}

TEST_CASE("truth areas follow the ellipse parameters over the cycle") {
    // Four frames per cycle sample the size factor at 0, 1/2, 1, 1/2:
    // ventricles peak at t=0 and bottom out at t=2, atria run in
    // counter-phase.
    const PhantomOutput out = generate(a2c_spec(3));
    std::vector<double> lv_areas, la_areas;
    for (const auto& truth : out.truth) {
        lv_areas.push_back(class_area_cm2(truth, Chamber::LV));
        la_areas.push_back(class_area_cm2(truth, Chamber::LA));
    }
    CHECK(lv_areas[0] > lv_areas[1]);
    CHECK(lv_areas[1] > lv_areas[2]);
    CHECK(lv_areas[1] == lv_areas[3]);
    CHECK(la_areas[0] < la_areas[1]);
    CHECK(la_areas[1] < la_areas[2]);

    // Rasterized areas track pi*a*b of the phase-scaled half-axes.
    CHECK(lv_areas[0] == doctest::Approx(kPi * 2.50 * 1.15).epsilon(0.025));
    CHECK(lv_areas[2] == doctest::Approx(kPi * 2.50 * 0.80 * 1.15 * 0.85).epsilon(0.025));
    CHECK(la_areas[2] == doctest::Approx(kPi * 1.95 * 1.45).epsilon(0.025));
    CHECK(la_areas[0] == doctest::Approx(kPi * 1.95 * 0.88 * 1.45 * 0.90).epsilon(0.025));
}

TEST_CASE("frames are bounded, sector-limited and darker inside chambers") {
    const PhantomOutput out = generate(a2c_spec(11));
    const Raster& img = out.frames[0];
    const LabelMap& truth = out.truth[0];

    double pool_sum = 0.0, tissue_sum = 0.0;
    int pool_n = 0, tissue_n = 0;
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const float v = img.at(r, c);
            if (!img.sector.contains(r, c)) {
                CHECK(v == 0.0f);
                continue;
            }
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
            if (truth.at(r, c) == Chamber::LV) {
                pool_sum += v;
                ++pool_n;
            } else if (truth.at(r, c) == Chamber::background) {
                tissue_sum += v;
                ++tissue_n;
            }
        }
    }
    REQUIRE(pool_n > 0);
    REQUIRE(tissue_n > 0);
    CHECK(pool_sum / pool_n < 0.15);
    CHECK(tissue_sum / tissue_n > 0.35);
}

TEST_CASE("short-axis truth carries a myocardial ring around the lumen") {
    StudyPhantomParams p;
    p.frames_per_cycle = 2;
    p.seed = 5;
    const PhantomSpec spec = make_view_spec(View::sax, p);
    const PhantomOutput out = generate(spec);
    const LabelMap& truth = out.truth[0];

    const double lumen = class_area_cm2(truth, Chamber::LV);
    const double myo = class_area_cm2(truth, Chamber::LVMyo);
    const double r_in = 1.48, r_out = 1.48 + 0.55;
    CHECK(lumen == doctest::Approx(kPi * r_in * r_in).epsilon(0.03));
    CHECK(myo == doctest::Approx(kPi * (r_out * r_out - r_in * r_in)).epsilon(0.03));

    // Every lumen-adjacent outside pixel is myocardium, so the ring closes.
    for (int r = 1; r < truth.height - 1; ++r)
        for (int c = 1; c < truth.width - 1; ++c) {
            if (truth.at(r, c) != Chamber::LV) continue;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const Chamber n = truth.at(r + dr, c + dc);
                    CHECK((n == Chamber::LV || n == Chamber::LVMyo));
                }
        }
}

TEST_CASE("phantom specs are validated") {
    PhantomSpec spec = a2c_spec(1);
    spec.frames_per_cycle = 1;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);

    spec = a2c_spec(1);
    spec.speckle = 1.5;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);

    spec = a2c_spec(1);
    spec.chambers[0].contract_long = 1.0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);

    spec = a2c_spec(1);
    spec.chambers[0].semi_short_cm = 0.0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);

    spec = a2c_spec(1);
    spec.chambers.clear();
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);

    // Two pools on the same spot collide.
    spec = a2c_spec(1);
    spec.chambers[1].center_row_cm = spec.chambers[0].center_row_cm;
    spec.chambers[1].center_col_cm = spec.chambers[0].center_col_cm;
    CHECK_THROWS_WITH_AS(generate(spec), "phantom: overlapping chamber ellipses",
                         std::invalid_argument);

    // A chamber poking above the apex leaves the sector.
    spec = a2c_spec(1);
    spec.chambers = {spec.chambers[0]};
    spec.chambers[0].center_row_cm = 0.5;
    spec.chambers[0].center_col_cm = 6.4;
    spec.chambers[0].semi_long_cm = 0.5;
    spec.chambers[0].semi_short_cm = 0.3;
    CHECK_THROWS_WITH_AS(generate(spec), "phantom: chamber leaves the sector",
                         std::invalid_argument);

    // Myocardium is painted from the lumen, not listed as a pool.
    spec = a2c_spec(1);
    spec.chambers[0].chamber = Chamber::LVMyo;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("degradations at neutral parameters are identities") {
    const PhantomOutput out = generate(a2c_spec(23, 2));
    const Raster& img = out.frames[0];

    DegradeParams p;  // attenuation 1, sigma 0, shift 0
    CHECK(degrade(img, DegradeMode::dropout, p).pixels == img.pixels);
    CHECK(degrade(img, DegradeMode::blur, p).pixels == img.pixels);
    CHECK(degrade(img, DegradeMode::gain, p).pixels == img.pixels);

    p.attenuation = -0.1;
    CHECK_THROWS_AS(degrade(img, DegradeMode::dropout, p), std::invalid_argument);
    p.attenuation = 1.0;
    p.blur_sigma_px = -1.0;
    CHECK_THROWS_AS(degrade(img, DegradeMode::blur, p), std::invalid_argument);
}

TEST_CASE("dropout attenuates exactly the angular wedge") {
    const PhantomOutput out = generate(a2c_spec(29, 2));
    const Raster& img = out.frames[0];

    DegradeParams p;
    p.angle_from_deg = -40.0;
    p.angle_to_deg = -34.0;
    p.attenuation = 0.25;
    p.radius_from = 0.45;
    p.radius_to = 0.95;
    const Raster got = degrade(img, DegradeMode::dropout, p);

    int hit = 0;
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const float v = img.at(r, c);
            bool in_wedge = false;
            if (img.sector.contains(r, c)) {
                const double dr = r - img.sector.apex_row;
                const double dc = c - img.sector.apex_col;
                const double frac = std::hypot(dr, dc) / img.sector.depth_px;
                const double ang = std::atan2(dc, dr) * 180.0 / kPi;
                in_wedge = frac >= p.radius_from && frac <= p.radius_to &&
                           ang >= p.angle_from_deg && ang <= p.angle_to_deg;
            }
            const float want = in_wedge ? static_cast<float>(v * p.attenuation) : v;
            CHECK(got.at(r, c) == want);
            if (in_wedge) ++hit;
        }
    }
    CHECK(hit > 100);
}

TEST_CASE("blur smooths inside the sector and gain shifts with clamping") {
    const PhantomOutput out = generate(a2c_spec(31, 2));
    const Raster& img = out.frames[0];

    DegradeParams p;
    p.blur_sigma_px = 2.0;
    const Raster blurred = degrade(img, DegradeMode::blur, p);
    std::vector<double> before, after;
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            if (!img.sector.contains(r, c)) {
                CHECK(blurred.at(r, c) == 0.0f);
                continue;
            }
            before.push_back(img.at(r, c));
            after.push_back(blurred.at(r, c));
        }
    CHECK(sample_stddev(after) < sample_stddev(before));

    DegradeParams g;
    g.gain_shift = 0.6;
    const Raster bright = degrade(img, DegradeMode::gain, g);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            const float want = img.sector.contains(r, c)
                                   ? static_cast<float>(std::clamp(img.at(r, c) + 0.6, 0.0, 1.0))
                                   : img.at(r, c);
            CHECK(bright.at(r, c) == want);
        }
}

TEST_CASE("study specs share one anatomy across views") {
    StudyPhantomParams p;
    p.scale = 1.05;
    p.contract_scale = 0.95;
    p.seed = 77;

    const PhantomSpec a2c = make_view_spec(View::a2c, p);
    const PhantomSpec a4c = make_view_spec(View::a4c, p);
    const PhantomSpec sax = make_view_spec(View::sax, p);

    auto find = [](const PhantomSpec& s, Chamber c) -> const ChamberEllipse& {
        for (const auto& ch : s.chambers)
            if (ch.chamber == c) return ch;
        throw std::logic_error("chamber missing from spec");
    };
    const auto& lv2 = find(a2c, Chamber::LV);
    const auto& lv4 = find(a4c, Chamber::LV);
    CHECK(lv2.semi_long_cm == lv4.semi_long_cm);
    CHECK(lv2.semi_short_cm == lv4.semi_short_cm);
    CHECK(lv2.contract_long == lv4.contract_long);
    CHECK(lv2.semi_long_cm == doctest::Approx(2.50 * 1.05).epsilon(1e-12));
    CHECK(find(a4c, Chamber::RA).atrial_phase);
    CHECK_FALSE(find(a4c, Chamber::RV).atrial_phase);
    CHECK(sax.rind_width_cm == doctest::Approx(0.55 * 1.05).epsilon(1e-12));
    CHECK(sax.chambers.size() == 1);

    // Per-view noise streams are separated.
    CHECK(a2c.seed != a4c.seed);
    CHECK(a2c.seed != sax.seed);

    StudyPhantomParams bad = p;
    bad.scale = 0.89;
    CHECK_THROWS_AS(make_view_spec(View::a2c, bad), std::invalid_argument);
    bad.scale = 1.11;
    CHECK_THROWS_AS(make_view_spec(View::a2c, bad), std::invalid_argument);
    bad = p;
    bad.contract_scale = 0.49;
    CHECK_THROWS_AS(make_view_spec(View::a2c, bad), std::invalid_argument);
    bad.contract_scale = 1.11;
    CHECK_THROWS_AS(make_view_spec(View::a2c, bad), std::invalid_argument);
}

TEST_CASE("closed-form study measurements match the ellipse formulas") {
    StudyPhantomParams p;
    p.scale = 1.07;
    p.contract_scale = 0.93;
    const MeasurementSet m = analytic_study_measurements(p);

    auto revolution = [](double a, double b) { return 4.0 / 3.0 * kPi * a * b * b; };
    const double s = p.scale, f = p.contract_scale;
    const double lv_a = 2.50 * s, lv_b = 1.15 * s;
    CHECK(m.values.at("lvedv_ml") == doctest::Approx(revolution(lv_a, lv_b)).epsilon(1e-12));
    CHECK(m.values.at("lvesv_ml") ==
          doctest::Approx(revolution(lv_a * (1.0 - 0.20 * f), lv_b * (1.0 - 0.15 * f)))
              .epsilon(1e-12));
    CHECK(m.values.at("lvef_pct") ==
          doctest::Approx(ejection_fraction(m.values.at("lvedv_ml"), m.values.at("lvesv_ml")))
              .epsilon(1e-12));
    CHECK(m.values.at("la_vol_ml") == doctest::Approx(revolution(1.95 * s, 1.45 * s)).epsilon(1e-12));
    CHECK(m.values.at("ra_vol_ml") == doctest::Approx(revolution(1.75 * s, 1.45 * s)).epsilon(1e-12));
    CHECK(m.values.at("rveda_cm2") == doctest::Approx(kPi * 2.10 * 1.10 * s * s).epsilon(1e-12));

    const double lum = 1.48 * s, rind = 0.55 * s;
    const double a2 = kPi * lum * lum;
    const double a1 = kPi * (lum + rind) * (lum + rind);
    CHECK(m.values.at("lv_mass_g") ==
          doctest::Approx(lv_mass_area_length(a1, a2, 2.0 * lv_a)).epsilon(1e-12));

    // The per-view generator reports the same closed forms.
    p.frames_per_cycle = 2;
    const MeasurementSet from_a2c = generate(make_view_spec(View::a2c, p)).analytic;
    CHECK(from_a2c.values.at("lvedv_ml") == doctest::Approx(m.values.at("lvedv_ml")).epsilon(1e-12));
    CHECK(from_a2c.values.at("lvesv_ml") == doctest::Approx(m.values.at("lvesv_ml")).epsilon(1e-12));
    CHECK(from_a2c.values.at("la_vol_ml") == doctest::Approx(m.values.at("la_vol_ml")).epsilon(1e-12));
    const MeasurementSet from_a4c = generate(make_view_spec(View::a4c, p)).analytic;
    CHECK(from_a4c.values.at("rveda_cm2") == doctest::Approx(m.values.at("rveda_cm2")).epsilon(1e-12));
    CHECK(from_a4c.values.at("rvesa_cm2") == doctest::Approx(m.values.at("rvesa_cm2")).epsilon(1e-12));
    CHECK(from_a4c.values.at("ra_vol_ml") == doctest::Approx(m.values.at("ra_vol_ml")).epsilon(1e-12));
    const MeasurementSet from_sax = generate(make_view_spec(View::sax, p)).analytic;
    CHECK(from_sax.values.at("sax_lumen_area_cm2") ==
          doctest::Approx(kPi * lum * lum).epsilon(1e-12));
    CHECK(from_sax.values.at("sax_epi_area_cm2") ==
          doctest::Approx(kPi * (lum + rind) * (lum + rind)).epsilon(1e-12));

    // Sanity anchor: a 4 cm sphere holds 33.51 mL.
    CHECK(4.0 / 3.0 * kPi * 2.0 * 2.0 * 2.0 == doctest::Approx(33.51).epsilon(0.002));
}
