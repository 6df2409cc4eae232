#include "echoseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "echoseg/common.hpp"

namespace echoseg {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Rayleigh sigma giving a unit-mean draw, so the speckle field multiplies
// the base intensities without shifting their average.
const double kUnitMeanSigma = std::sqrt(2.0 / kPi);

// Ellipse geometry in pixel units for one frame of the cycle.
struct EllipsePx {
    Chamber chamber;
    double cr, cc;        // center
    double along, ashort; // semi-axes after phase scaling
    double cos_t, sin_t;  // long-axis direction in (row, col)
};

bool inside(const EllipsePx& e, double r, double c, double grow = 0.0) {
    const double dr = r - e.cr;
    const double dc = c - e.cc;
    const double u = dr * e.cos_t + dc * e.sin_t;
    const double v = -dr * e.sin_t + dc * e.cos_t;
    const double a = e.along + grow;
    const double b = e.ashort + grow;
    return (u / a) * (u / a) + (v / b) * (v / b) <= 1.0;
}

// Size factor over the cycle: ventricles are largest at t = 0 and smallest
// mid-cycle, atria run the opposite way.
double phase_fraction(int t, int frames) { return (1.0 - std::cos(2.0 * kPi * t / frames)) / 2.0; }

void validate(const PhantomSpec& spec) {
    if (spec.frames_per_cycle < 2)
        throw std::invalid_argument("phantom: frames_per_cycle must be at least 2");
    if (spec.speckle < 0.0 || spec.speckle > 1.0)
        throw std::invalid_argument("phantom: speckle scale must lie in [0,1]");
    if (spec.size_px < 32) throw std::invalid_argument("phantom: image size too small");
    if (spec.spacing_mm <= 0.0) throw std::invalid_argument("phantom: non-positive spacing");
    if (spec.chambers.empty()) throw std::invalid_argument("phantom: no chambers given");
    if (spec.rind_width_cm < 0.0) throw std::invalid_argument("phantom: negative rind width");
    spec.sector.validate(spec.size_px, spec.size_px);
    for (const auto& ch : spec.chambers) {
        if (ch.semi_long_cm <= 0.0 || ch.semi_short_cm <= 0.0)
            throw std::invalid_argument("phantom: non-positive semi-axis");
        if (ch.contract_long < 0.0 || ch.contract_long >= 1.0 || ch.contract_short < 0.0 ||
            ch.contract_short >= 1.0)
            throw std::invalid_argument("phantom: contraction fraction must lie in [0,1)");
        if (ch.chamber == Chamber::background || ch.chamber == Chamber::LVMyo)
            throw std::invalid_argument("phantom: chambers must be blood pools");
    }
}

std::vector<EllipsePx> frame_ellipses(const PhantomSpec& spec, int t) {
    const double px_per_cm = 10.0 / spec.spacing_mm;
    const double lam = phase_fraction(t, spec.frames_per_cycle);
    std::vector<EllipsePx> out;
    out.reserve(spec.chambers.size());
    for (const auto& ch : spec.chambers) {
        const double phase = ch.atrial_phase ? 1.0 - lam : lam;
        const double rad = ch.angle_deg * kPi / 180.0;
        out.push_back({ch.chamber, ch.center_row_cm * px_per_cm, ch.center_col_cm * px_per_cm,
                       ch.semi_long_cm * (1.0 - ch.contract_long * phase) * px_per_cm,
                       ch.semi_short_cm * (1.0 - ch.contract_short * phase) * px_per_cm,
                       std::cos(rad), std::sin(rad)});
    }
    return out;
}

// Paints cls over every in-ellipse pixel currently holding `over`; pixels
// already cls or `leave` stay as they are, anything else is a collision.
void paint_region(LabelMap& truth, const SectorGeometry& sector, const EllipsePx& e, double grow,
                  Chamber cls, Chamber over, Chamber leave) {
    const double extent = std::max(e.along, e.ashort) + grow + 1.0;
    const int r0 = std::max(0, static_cast<int>(std::floor(e.cr - extent)));
    const int r1 = std::min(truth.height - 1, static_cast<int>(std::ceil(e.cr + extent)));
    const int c0 = std::max(0, static_cast<int>(std::floor(e.cc - extent)));
    const int c1 = std::min(truth.width - 1, static_cast<int>(std::ceil(e.cc + extent)));
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
            if (!inside(e, r, c, grow)) continue;
            if (!sector.contains(r, c))
                throw std::invalid_argument("phantom: chamber leaves the sector");
            const Chamber cur = truth.at(r, c);
            if (cur == cls || cur == leave) continue;
            if (cur != over) throw std::invalid_argument("phantom: overlapping chamber ellipses");
            truth.set(r, c, cls);
        }
    }
}

}  // namespace

PhantomOutput generate(const PhantomSpec& spec) {
    validate(spec);
    const int n = spec.size_px;
    const double px_per_cm = 10.0 / spec.spacing_mm;

    PhantomOutput out;
    out.frames.reserve(spec.frames_per_cycle);
    out.truth.reserve(spec.frames_per_cycle);

    for (int t = 0; t < spec.frames_per_cycle; ++t) {
        const auto ellipses = frame_ellipses(spec, t);

        LabelMap truth = LabelMap::zeros(n, n, spec.spacing_mm);
        for (const auto& e : ellipses)
            paint_region(truth, spec.sector, e, 0.0, e.chamber, Chamber::background, e.chamber);
        if (spec.view == View::sax && spec.rind_width_cm > 0.0) {
            const double grow = spec.rind_width_cm * px_per_cm;
            for (const auto& e : ellipses)
                if (e.chamber == Chamber::LV)
                    paint_region(truth, spec.sector, e, grow, Chamber::LVMyo, Chamber::background,
                                 Chamber::LV);
        }

        Raster img = Raster::zeros(n, n, spec.spacing_mm, spec.sector);
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(t)));
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                const double factor = (1.0 - spec.speckle) + spec.speckle * rng.rayleigh(kUnitMeanSigma);
                if (!spec.sector.contains(r, c)) continue;
                const Chamber cls = truth.at(r, c);
                const bool pool = cls != Chamber::background && cls != Chamber::LVMyo;
                const double base = pool ? spec.chamber_intensity : spec.tissue_intensity;
                img.at(r, c) = static_cast<float>(std::clamp(base * factor, 0.0, 1.0));
            }
        }

        out.frames.push_back(std::move(img));
        out.truth.push_back(std::move(truth));
    }

    // Closed-form measurements from the continuous parameters. Long-axis
    // volumes treat each ellipse as a solid of revolution about its long
    // axis, which matches the method-of-disks on a biplane-symmetric shape.
    auto revolution_ml = [](double a_cm, double b_cm) { return 4.0 / 3.0 * kPi * a_cm * b_cm * b_cm; };
    for (const auto& ch : spec.chambers) {
        const double ed_l = ch.atrial_phase ? ch.semi_long_cm * (1.0 - ch.contract_long)
                                            : ch.semi_long_cm;
        const double ed_s = ch.atrial_phase ? ch.semi_short_cm * (1.0 - ch.contract_short)
                                            : ch.semi_short_cm;
        const double max_l = ch.semi_long_cm;
        const double max_s = ch.semi_short_cm;
        const double es_l = ch.semi_long_cm * (1.0 - ch.contract_long);
        const double es_s = ch.semi_short_cm * (1.0 - ch.contract_short);
        auto& vals = out.analytic.values;
        switch (ch.chamber) {
            case Chamber::LV:
                if (spec.view == View::sax) {
                    vals["sax_lumen_area_cm2"] = kPi * max_l * max_s;
                    vals["sax_lumen_es_cm2"] = kPi * es_l * es_s;
                    vals["sax_epi_area_cm2"] =
                        kPi * (max_l + spec.rind_width_cm) * (max_s + spec.rind_width_cm);
                } else {
                    vals["lvedv_ml"] = revolution_ml(ed_l, ed_s);
                    vals["lvesv_ml"] = revolution_ml(es_l, es_s);
                    vals["lvef_pct"] = ejection_fraction(vals["lvedv_ml"], vals["lvesv_ml"]);
                }
                break;
            case Chamber::LA:
                vals["la_vol_ml"] = revolution_ml(max_l, max_s);
                break;
            case Chamber::RA:
                vals["ra_vol_ml"] = revolution_ml(max_l, max_s);
                break;
            case Chamber::RV:
                vals["rveda_cm2"] = kPi * ed_l * ed_s;
                vals["rvesa_cm2"] = kPi * es_l * es_s;
                break;
            default:
                break;
        }
    }
    return out;
}

Raster degrade(const Raster& frame, DegradeMode mode, const DegradeParams& params,
               std::uint64_t seed) {
    (void)seed;  // reserved for stochastic degradations
    Raster out = frame;
    switch (mode) {
        case DegradeMode::dropout: {
            if (params.attenuation < 0.0 || params.attenuation > 1.0)
                throw std::invalid_argument("degrade: attenuation must lie in [0,1]");
            if (params.attenuation == 1.0) return out;
            const double from = std::min(params.angle_from_deg, params.angle_to_deg);
            const double to = std::max(params.angle_from_deg, params.angle_to_deg);
            for (int r = 0; r < out.height; ++r) {
                for (int c = 0; c < out.width; ++c) {
                    if (!out.sector.contains(r, c)) continue;
                    const double dr = r - out.sector.apex_row;
                    const double dc = c - out.sector.apex_col;
                    const double dist = std::hypot(dr, dc);
                    const double frac = out.sector.depth_px > 0.0 ? dist / out.sector.depth_px : 0.0;
                    if (frac < params.radius_from || frac > params.radius_to) continue;
                    const double ang = std::atan2(dc, dr) * 180.0 / kPi;
                    if (ang < from || ang > to) continue;
                    out.at(r, c) = static_cast<float>(out.at(r, c) * params.attenuation);
                }
            }
            return out;
        }
        case DegradeMode::blur: {
            if (params.blur_sigma_px < 0.0)
                throw std::invalid_argument("degrade: negative blur sigma");
            if (params.blur_sigma_px == 0.0) return out;
            const double sigma = params.blur_sigma_px;
            const int radius = static_cast<int>(std::ceil(3.0 * sigma));
            std::vector<double> kernel(2 * radius + 1);
            double sum = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
                sum += kernel[i + radius];
            }
            for (auto& k : kernel) k /= sum;
            auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
            Raster tmp = out;
            for (int r = 0; r < out.height; ++r)
                for (int c = 0; c < out.width; ++c) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += kernel[i + radius] * out.at(r, clampi(c + i, out.width - 1));
                    tmp.at(r, c) = static_cast<float>(acc);
                }
            for (int r = 0; r < out.height; ++r)
                for (int c = 0; c < out.width; ++c) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += kernel[i + radius] * tmp.at(clampi(r + i, out.height - 1), c);
                    out.at(r, c) = static_cast<float>(acc);
                }
            apply_sector_mask(out);
            return out;
        }
        case DegradeMode::gain: {
            if (params.gain_shift == 0.0) return out;
            for (int r = 0; r < out.height; ++r)
                for (int c = 0; c < out.width; ++c)
                    if (out.sector.contains(r, c))
                        out.at(r, c) = static_cast<float>(
                            std::clamp(out.at(r, c) + params.gain_shift, 0.0, 1.0));
            return out;
        }
    }
    throw std::invalid_argument("degrade: unknown mode");
}

namespace {

ChamberEllipse scaled(Chamber chamber, double cr, double cc, double sl, double ss, double cl,
                      double cs, bool atrial, const StudyPhantomParams& p) {
    // Uniform zoom about the sector apex keeps every chamber inside the
    // sector at any scale the gates allow.
    const double ar = 0.2, ac = 6.4;
    ChamberEllipse e;
    e.chamber = chamber;
    e.center_row_cm = ar + p.scale * (cr - ar);
    e.center_col_cm = ac + p.scale * (cc - ac);
    e.semi_long_cm = sl * p.scale;
    e.semi_short_cm = ss * p.scale;
    e.contract_long = cl * p.contract_scale;
    e.contract_short = cs * p.contract_scale;
    e.atrial_phase = atrial;
    return e;
}

}  // namespace

PhantomSpec make_view_spec(View view, const StudyPhantomParams& params) {
    if (params.scale < 0.9 || params.scale > 1.1)
        throw std::invalid_argument("phantom: study scale outside the supported range");
    if (params.contract_scale < 0.5 || params.contract_scale > 1.1)
        throw std::invalid_argument("phantom: contraction scale outside the supported range");
    PhantomSpec spec;
    spec.view = view;
    spec.frames_per_cycle = params.frames_per_cycle;
    spec.speckle = params.speckle;
    spec.seed = derive_seed(params.seed, static_cast<std::uint64_t>(view));
    switch (view) {
        case View::a2c:
            spec.chambers = {
                scaled(Chamber::LV, 4.8, 6.4, 2.50, 1.15, 0.20, 0.15, false, params),
                scaled(Chamber::LA, 9.5, 6.4, 1.95, 1.45, 0.12, 0.10, true, params),
            };
            break;
        case View::a4c:
            spec.chambers = {
                scaled(Chamber::RV, 4.8, 4.75, 2.10, 1.10, 0.15, 0.10, false, params),
                scaled(Chamber::LV, 4.8, 8.0, 2.50, 1.15, 0.20, 0.15, false, params),
                scaled(Chamber::RA, 9.5, 4.80, 1.75, 1.45, 0.08, 0.06, true, params),
                scaled(Chamber::LA, 9.5, 8.0, 1.95, 1.45, 0.12, 0.10, true, params),
            };
            break;
        case View::sax:
            spec.chambers = {
                scaled(Chamber::LV, 6.4, 6.4, 1.48, 1.48, 0.10, 0.10, false, params),
            };
            spec.rind_width_cm = 0.55 * params.scale;
            break;
    }
    return spec;
}

MeasurementSet analytic_study_measurements(const StudyPhantomParams& params) {
    const double s = params.scale;
    const double f = params.contract_scale;
    auto revolution_ml = [](double a, double b) { return 4.0 / 3.0 * kPi * a * b * b; };

    MeasurementSet out;
    auto& vals = out.values;
    const double lv_a = 2.50 * s, lv_b = 1.15 * s;
    vals["lvedv_ml"] = revolution_ml(lv_a, lv_b);
    vals["lvesv_ml"] = revolution_ml(lv_a * (1.0 - 0.20 * f), lv_b * (1.0 - 0.15 * f));
    vals["lvef_pct"] = ejection_fraction(vals["lvedv_ml"], vals["lvesv_ml"]);
    vals["la_vol_ml"] = revolution_ml(1.95 * s, 1.45 * s);
    vals["ra_vol_ml"] = revolution_ml(1.75 * s, 1.45 * s);
    vals["rveda_cm2"] = kPi * 2.10 * 1.10 * s * s;
    vals["rvesa_cm2"] = kPi * (2.10 * (1.0 - 0.15 * f)) * (1.10 * (1.0 - 0.10 * f)) * s * s;

    const double lum = 1.48 * s, rind = 0.55 * s;
    const double a2 = kPi * lum * lum;
    const double a1 = kPi * (lum + rind) * (lum + rind);
    vals["lv_mass_g"] = lv_mass_area_length(a1, a2, 2.0 * lv_a);
    return out;
}

}  // namespace echoseg
