#include "echoseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "echoseg/common.hpp"

namespace echoseg {

namespace {

constexpr double kPi = 3.14159265358979323846;

Segment segment_of_pixels(std::vector<std::int32_t> pixels, int width, int height,
                          double spacing_mm) {
    Component comp;
    comp.pixels = std::move(pixels);
    std::sort(comp.pixels.begin(), comp.pixels.end());
    comp.min_row = height;
    comp.max_row = -1;
    comp.min_col = width;
    comp.max_col = -1;
    for (auto p : comp.pixels) {
        int r = p / width, c = p % width;
        comp.min_row = std::min(comp.min_row, r);
        comp.max_row = std::max(comp.max_row, r);
        comp.min_col = std::min(comp.min_col, c);
        comp.max_col = std::max(comp.max_col, c);
    }
    return describe(comp, width, height, spacing_mm);
}

const std::vector<Chamber>& required_chambers(View view) {
    static const std::vector<Chamber> a2c{Chamber::LV, Chamber::LA};
    static const std::vector<Chamber> a4c{Chamber::LV, Chamber::LA, Chamber::RV, Chamber::RA};
    static const std::vector<Chamber> sax{Chamber::LV};
    switch (view) {
        case View::a2c: return a2c;
        case View::a4c: return a4c;
        default: return sax;
    }
}

LabelMap paint_segments(const std::vector<Segment>& segments, int width, int height,
                        double spacing_mm) {
    LabelMap out = LabelMap::zeros(width, height, spacing_mm);
    for (const auto& s : segments)
        for (auto p : s.pixels) out.classes[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>(s.chamber);
    return out;
}

// Replaces one chamber of a label map, giving way to other classes where
// the replacement would collide with them.
LabelMap replace_chamber(const LabelMap& label, Chamber chamber, const BinaryMask& mask) {
    LabelMap out = label;
    for (auto& cls : out.classes)
        if (cls == static_cast<std::uint8_t>(chamber)) cls = 0;
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c)
            if (mask.at(r, c) && out.at(r, c) == Chamber::background) out.set(r, c, chamber);
    return out;
}

// --- A2C initial step -----------------------------------------------------

std::optional<LabelMap> initial_a2c(const Raster& frame, const PipelineConfig& cfg) {
    FilterParams fp;
    fp.sigma_spatial_px = cfg.bilateral_sigma_spatial_px;
    fp.sigma_range = cfg.bilateral_sigma_range;
    Raster smooth = filter(frame, FilterKind::bilateral, fp);
    auto pool = binarize_clean(smooth, cfg.binarize);
    if (!pool) return std::nullopt;
    auto seeds = distance_seeds(*pool, cfg.seed_min_distance_px);
    if (seeds.empty()) return std::nullopt;
    BasinMap basins = watershed(*pool, seeds);

    std::vector<Segment> segments;
    std::vector<std::vector<std::int32_t>> basin_pixels(static_cast<std::size_t>(basins.count) + 1);
    for (std::size_t i = 0; i < basins.basin.size(); ++i)
        if (basins.basin[i] > 0) basin_pixels[basins.basin[i]].push_back(static_cast<std::int32_t>(i));
    for (int b = 1; b <= basins.count; ++b)
        segments.push_back(
            segment_of_pixels(std::move(basin_pixels[b]), frame.width, frame.height, frame.spacing_mm));

    auto assigned = assign_chambers(std::move(segments), View::a2c, cfg.mirrored);
    if (!assigned) return std::nullopt;
    QcResult qc = qc_filter(*assigned, cfg.qc, View::a2c);
    if (qc.accepted.size() != assigned->size()) return std::nullopt;
    return paint_segments(qc.accepted, frame.width, frame.height, frame.spacing_mm);
}

// --- A4C initial step -----------------------------------------------------

std::optional<LabelMap> initial_a4c(const Raster& frame, const PipelineConfig& cfg,
                                    const ShapeAtlas& a2c_model) {
    auto pred = a2c_model.predict(frame);
    if (!pred) return std::nullopt;

    BinaryMask pools = BinaryMask::zeros(frame.width, frame.height, frame.spacing_mm);
    for (int r = 0; r < frame.height; ++r)
        for (int c = 0; c < frame.width; ++c) {
            Chamber cls = pred->at(r, c);
            if (cls != Chamber::background && cls != Chamber::LVMyo) pools.set(r, c, true);
        }
    auto comps = connected_components(pools);
    std::vector<Segment> segments;
    for (const auto& comp : comps)
        segments.push_back(describe(comp, frame.width, frame.height, frame.spacing_mm));

    auto assigned = assign_chambers(std::move(segments), View::a4c, cfg.mirrored);
    if (!assigned) return std::nullopt;
    QcResult qc = qc_filter(*assigned, cfg.qc, View::a4c);
    if (qc.accepted.size() != assigned->size()) return std::nullopt;
    return paint_segments(qc.accepted, frame.width, frame.height, frame.spacing_mm);
}

// --- SAX initial step ------------------------------------------------------

std::optional<LabelMap> initial_sax(const Raster& frame, const PipelineConfig& cfg) {
    FilterParams med;
    med.kernel = cfg.median_kernel;
    Raster smooth = filter(frame, FilterKind::median, med);
    FilterParams lap;
    lap.kernel = cfg.laplacian_kernel;
    Raster edges = filter(smooth, FilterKind::laplacian, lap);
    auto circles = hough_circles(edges, cfg.hough);
    if (circles.empty()) return std::nullopt;

    const Circle& best = circles.front();
    LabelMap label = LabelMap::zeros(frame.width, frame.height, frame.spacing_mm);
    const long r2 = static_cast<long>(best.radius) * best.radius;
    for (int r = 0; r < frame.height; ++r)
        for (int c = 0; c < frame.width; ++c) {
            long dr = r - best.center_row, dc = c - best.center_col;
            if (dr * dr + dc * dc <= r2 && frame.sector.contains(r, c))
                label.set(r, c, Chamber::LV);
        }
    if (!prediction_passes_qc(label, View::sax, cfg.qc)) return std::nullopt;
    return label;
}

// --- SAX edge refinement ---------------------------------------------------

// Gradient magnitude by central differences, replicate border.
std::vector<float> gradient_magnitude(const Raster& img) {
    std::vector<float> mag(static_cast<std::size_t>(img.width) * img.height, 0.0f);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            const float gr = img.at(std::min(r + 1, img.height - 1), c) -
                             img.at(std::max(r - 1, 0), c);
            const float gc = img.at(r, std::min(c + 1, img.width - 1)) -
                             img.at(r, std::max(c - 1, 0));
            mag[static_cast<std::size_t>(r) * img.width + c] = std::sqrt(gr * gr + gc * gc) / 2.0f;
        }
    return mag;
}

double sample_bilinear(const std::vector<float>& field, int width, int height, double row,
                       double col) {
    row = std::clamp(row, 0.0, height - 1.0);
    col = std::clamp(col, 0.0, width - 1.0);
    int r0 = static_cast<int>(row), c0 = static_cast<int>(col);
    int r1 = std::min(r0 + 1, height - 1), c1 = std::min(c0 + 1, width - 1);
    double fr = row - r0, fc = col - c0;
    auto v = [&](int r, int c) { return static_cast<double>(field[static_cast<std::size_t>(r) * width + c]); };
    return v(r0, c0) * (1 - fr) * (1 - fc) + v(r0, c1) * (1 - fr) * fc +
           v(r1, c0) * fr * (1 - fc) + v(r1, c1) * fr * fc;
}

void draw_segment(BinaryMask& mask, int r0, int c0, int r1, int c1) {
    int steps = std::max(std::abs(r1 - r0), std::abs(c1 - c0));
    for (int s = 0; s <= steps; ++s) {
        int r = r0 + (steps ? (r1 - r0) * s / steps : 0);
        int c = c0 + (steps ? (c1 - c0) * s / steps : 0);
        if (mask.in_bounds(r, c)) mask.set(r, c, true);
    }
}

// Replaces the lumen disk by a closed contour through the strongest
// gradient response within the annulus around the current disk boundary.
std::optional<LabelMap> refine_sax_ring(const Raster& frame, const LabelMap& label,
                                        const PipelineConfig& cfg) {
    BinaryMask lumen = label.mask_of(Chamber::LV);
    const double n = static_cast<double>(lumen.count());
    if (n < 9.0) return std::nullopt;
    double cr = 0.0, cc = 0.0;
    for (int r = 0; r < lumen.height; ++r)
        for (int c = 0; c < lumen.width; ++c)
            if (lumen.at(r, c)) {
                cr += r;
                cc += c;
            }
    cr /= n;
    cc /= n;
    const double radius = std::sqrt(n / kPi);

    FilterParams med;
    med.kernel = cfg.median_kernel;
    Raster smooth = filter(frame, FilterKind::median, med);
    std::vector<float> grad = gradient_magnitude(smooth);

    const int half = cfg.annulus_halfwidth_px;
    std::vector<double> radii(360);
    for (int k = 0; k < 360; ++k) {
        const double ang = k * kPi / 180.0;
        const double dr = std::cos(ang), dc = std::sin(ang);
        double best = -1.0;
        int best_off = 0;
        for (int off = -half; off <= half; ++off) {
            const double rho = radius + off;
            if (rho < 1.0) continue;
            const double g =
                sample_bilinear(grad, frame.width, frame.height, cr + rho * dr, cc + rho * dc);
            if (g > best) {
                best = g;
                best_off = off;
            }
        }
        radii[k] = radius + best_off;
    }

    // Circular median smoothing knocks out isolated speckle-driven spikes.
    std::vector<double> smooth_r(360);
    const int win = std::max(1, cfg.contour_median_window) | 1;
    const int hw = win / 2;
    std::vector<double> window(win);
    for (int k = 0; k < 360; ++k) {
        for (int j = -hw; j <= hw; ++j) window[j + hw] = radii[(k + j + 360) % 360];
        std::nth_element(window.begin(), window.begin() + hw, window.end());
        smooth_r[k] = window[hw];
    }

    BinaryMask ring = BinaryMask::zeros(frame.width, frame.height, frame.spacing_mm);
    int pr = 0, pc = 0;
    for (int k = 0; k <= 360; ++k) {
        const int kk = k % 360;
        const double ang = kk * kPi / 180.0;
        const int r = static_cast<int>(std::lround(cr + smooth_r[kk] * std::cos(ang)));
        const int c = static_cast<int>(std::lround(cc + smooth_r[kk] * std::sin(ang)));
        if (k > 0) draw_segment(ring, pr, pc, r, c);
        pr = r;
        pc = c;
    }

    LabelMap out = LabelMap::zeros(frame.width, frame.height, frame.spacing_mm);
    for (int r = 0; r < frame.height; ++r)
        for (int c = 0; c < frame.width; ++c)
            if (ring.at(r, c) && frame.sector.contains(r, c)) out.set(r, c, Chamber::LV);
    if (out.mask_of(Chamber::LV).empty()) return std::nullopt;
    return out;
}

}  // namespace

bool prediction_passes_qc(const LabelMap& label, View view, const QcConfig& qc) {
    auto present = label.present_chambers();
    for (Chamber need : required_chambers(view))
        if (std::find(present.begin(), present.end(), need) == present.end()) return false;
    for (Chamber ch : present) {
        const ChamberGate* gate = qc.find(view, ch);
        if (!gate) continue;
        std::vector<std::int32_t> pixels;
        for (std::size_t i = 0; i < label.classes.size(); ++i)
            if (label.classes[i] == static_cast<std::uint8_t>(ch))
                pixels.push_back(static_cast<std::int32_t>(i));
        Segment seg = segment_of_pixels(std::move(pixels), label.width, label.height, label.spacing_mm);
        if (seg.area_cm2 < gate->area_min_cm2 || seg.area_cm2 > gate->area_max_cm2) return false;
        if (seg.eccentricity < gate->ecc_min || seg.eccentricity > gate->ecc_max) return false;
    }
    return true;
}

std::optional<LabelMap> initial_label(View view, const Raster& frame, const PipelineConfig& cfg,
                                      const ShapeAtlas* a2c_model) {
    switch (view) {
        case View::a2c: return initial_a2c(frame, cfg);
        case View::a4c:
            if (!a2c_model || !a2c_model->fitted())
                throw PipelineError("a4c pipeline requires a fitted a2c model");
            return initial_a4c(frame, cfg, *a2c_model);
        default: return initial_sax(frame, cfg);
    }
}

RoundAudit self_learning_round(const std::string& step, Refiner& refiner,
                               const std::vector<PipelineFrame>& frames, LabelSet& labels,
                               View view, const PipelineConfig& cfg,
                               std::vector<std::string>& warnings) {
    RoundAudit audit;
    audit.step = step;
    audit.labels_before = static_cast<int>(labels.size());
    audit.labels_after = audit.labels_before;

    std::vector<TrainingPair> pairs;
    for (const auto& f : frames) {
        auto it = labels.find(f.frame_id);
        if (it != labels.end()) pairs.push_back({&f.image, &it->second});
    }
    try {
        refiner.fit(pairs);
    } catch (const PipelineError& e) {
        warnings.push_back(step + ": " + e.what() + "; labels kept as they were");
        return audit;
    }
    auto curve = refiner.fit_curve();
    if (curve.size() >= 3) audit.elbow = elbow_index(curve);

    int predictions = 0;
    for (const auto& f : frames) {
        auto pred = refiner.predict(f.image);
        if (!pred) continue;
        ++predictions;
        if (!prediction_passes_qc(*pred, view, cfg.qc)) {
            ++audit.rejected;
            continue;
        }
        if (labels.count(f.frame_id))
            ++audit.replaced;
        else
            ++audit.recruited;
        labels[f.frame_id] = std::move(*pred);
    }
    audit.labels_after = static_cast<int>(labels.size());
    if (predictions > 0 && audit.replaced + audit.recruited == 0)
        warnings.push_back(step + ": every prediction failed qc; labels kept as they were");
    return audit;
}

ViewResult run_view_pipeline(View view, const std::vector<PipelineFrame>& frames,
                             const PipelineConfig& cfg, const ShapeAtlas* a2c_model) {
    {
        std::set<std::string> ids;
        for (const auto& f : frames)
            if (!ids.insert(f.frame_id).second)
                throw std::invalid_argument("run_view_pipeline: duplicate frame id " + f.frame_id);
    }
    if (view == View::a4c && (!a2c_model || !a2c_model->fitted()))
        throw PipelineError("a4c pipeline requires a fitted a2c model");

    ViewResult result;
    LabelSet& labels = result.labels;
    auto snapshot = [&](const char* name) { result.steps.emplace_back(name, labels); };
    auto round = [&](const char* name, ShapeAtlas& atlas) {
        result.audits.push_back(
            self_learning_round(name, atlas, frames, labels, view, cfg, result.warnings));
    };

    for (const auto& f : frames) {
        auto lbl = initial_label(view, f.image, cfg, a2c_model);
        if (lbl) labels.emplace(f.frame_id, std::move(*lbl));
    }
    if (labels.empty()) throw PipelineError("no usable weak labels");

    auto atlas = std::make_shared<ShapeAtlas>(cfg.atlas);
    result.refiner = atlas;

    switch (view) {
        case View::a2c: {
            snapshot("a1");
            round("a2", *atlas);
            snapshot("a2");
            // Boundary rings around the current chambers, refilled; trades
            // watershed basin edges for convex outlines before refitting.
            for (auto& [id, lbl] : labels) {
                try {
                    LabelMap candidate =
                        LabelMap::zeros(lbl.width, lbl.height, lbl.spacing_mm);
                    for (Chamber ch : {Chamber::LV, Chamber::LA}) {
                        BinaryMask m = lbl.mask_of(ch);
                        if (m.empty()) continue;
                        BinaryMask ring = edge_ring(m, cfg.ring_dilate_px, cfg.ring_erode_px);
                        BinaryMask filled = morphology(ring, MorphOp::fill_holes);
                        for (int r = 0; r < filled.height; ++r)
                            for (int c = 0; c < filled.width; ++c)
                                if (filled.at(r, c) && candidate.at(r, c) == Chamber::background)
                                    candidate.set(r, c, ch);
                    }
                    lbl = candidate;
                } catch (const DegenerateInput&) {
                    // keep the previous label for this frame
                }
            }
            round("a3", *atlas);
            snapshot("a3");
            for (auto& [id, lbl] : labels) {
                try {
                    BinaryMask lv = lbl.mask_of(Chamber::LV);
                    if (lv.empty()) continue;
                    LabelMap candidate = replace_chamber(lbl, Chamber::LV, stretch_lv(lv));
                    if (prediction_passes_qc(candidate, view, cfg.qc)) lbl = candidate;
                } catch (const DegenerateInput&) {
                }
            }
            round("a4", *atlas);
            snapshot("a4");
            break;
        }
        case View::a4c: {
            snapshot("b1");
            round("b2", *atlas);
            snapshot("b2");
            for (auto& [id, lbl] : labels) {
                try {
                    BinaryMask rv = lbl.mask_of(Chamber::RV);
                    BinaryMask lv = lbl.mask_of(Chamber::LV);
                    if (rv.empty() || lv.empty()) continue;
                    lbl = replace_chamber(lbl, Chamber::RV,
                                          stretch_rv(rv, lv, cfg.rv_height_ratio_gate));
                } catch (const DegenerateInput&) {
                }
            }
            round("b3", *atlas);
            snapshot("b3");
            break;
        }
        case View::sax: {
            snapshot("c1");
            for (const auto& f : frames) {
                auto it = labels.find(f.frame_id);
                if (it == labels.end()) continue;
                if (auto ring = refine_sax_ring(f.image, it->second, cfg)) it->second = std::move(*ring);
            }
            snapshot("c2");
            for (auto& [id, lbl] : labels) {
                BinaryMask m = lbl.mask_of(Chamber::LV);
                if (m.empty()) continue;
                LabelMap filled = LabelMap::zeros(lbl.width, lbl.height, lbl.spacing_mm);
                filled.paint(morphology(m, MorphOp::fill_holes), Chamber::LV);
                lbl = filled;
            }
            round("c3", *atlas);
            snapshot("c3");
            {
                std::size_t ordinal = 0;
                for (const auto& f : frames) {
                    const std::uint64_t frame_seed = derive_seed(cfg.seed, ordinal++);
                    auto it = labels.find(f.frame_id);
                    if (it == labels.end()) continue;
                    try {
                        BinaryMask lumen = it->second.mask_of(Chamber::LV);
                        it->second = myocardial_rind(lumen, cfg.rind, frame_seed);
                    } catch (const DegenerateInput&) {
                    }
                }
            }
            round("c4", *atlas);
            snapshot("c4");
            break;
        }
    }
    return result;
}

}  // namespace echoseg
