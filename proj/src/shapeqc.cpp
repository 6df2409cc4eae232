#include "echoseg/shapeqc.hpp"

#include <algorithm>
#include <cmath>

namespace echoseg {

const char* view_name(View v) {
    switch (v) {
        case View::a2c: return "a2c";
        case View::a4c: return "a4c";
        case View::sax: return "sax";
    }
    return "unknown";
}

std::optional<View> view_from_name(const std::string& name) {
    if (name == "a2c") return View::a2c;
    if (name == "a4c") return View::a4c;
    if (name == "sax") return View::sax;
    return std::nullopt;
}

BinaryMask Segment::to_mask() const {
    BinaryMask m = BinaryMask::zeros(width, height, spacing_mm);
    for (auto p : pixels) m.bits[static_cast<std::size_t>(p)] = 1;
    return m;
}

Segment describe(const Component& comp, int width, int height, double spacing_mm) {
    if (comp.pixels.empty()) throw std::invalid_argument("describe: empty component");
    if (spacing_mm <= 0.0) throw std::invalid_argument("describe: non-positive spacing");
    Segment s;
    s.pixels = comp.pixels;
    s.width = width;
    s.height = height;
    s.spacing_mm = spacing_mm;
    s.min_row = comp.min_row;
    s.max_row = comp.max_row;
    s.min_col = comp.min_col;
    s.max_col = comp.max_col;

    double n = static_cast<double>(comp.pixels.size());
    double cm_per_px = spacing_mm / 10.0;
    s.area_cm2 = n * cm_per_px * cm_per_px;

    double sr = 0.0, sc = 0.0;
    for (auto p : comp.pixels) {
        sr += p / width;
        sc += p % width;
    }
    s.centroid_row = sr / n;
    s.centroid_col = sc / n;

    double mrr = 0.0, mcc = 0.0, mrc = 0.0;
    for (auto p : comp.pixels) {
        double dr = p / width - s.centroid_row;
        double dc = p % width - s.centroid_col;
        mrr += dr * dr;
        mcc += dc * dc;
        mrc += dr * dc;
    }
    mrr /= n;
    mcc /= n;
    mrc /= n;
    double tr = mrr + mcc;
    double det = std::sqrt(std::max(0.0, (mrr - mcc) * (mrr - mcc) / 4.0 + mrc * mrc));
    double lmaj = tr / 2.0 + det;
    double lmin = std::max(0.0, tr / 2.0 - det);
    s.eccentricity = lmaj > 0.0 ? std::sqrt(std::max(0.0, 1.0 - lmin / lmaj)) : 0.0;
    return s;
}

const ChamberGate* QcConfig::find(View v, Chamber c) const {
    auto it = gates.find({v, c});
    return it == gates.end() ? nullptr : &it->second;
}

QcConfig QcConfig::defaults() {
    QcConfig q;
    q.gates[{View::a2c, Chamber::LV}] = {4.7, 104.0, 0.35, 0.97};
    q.gates[{View::a2c, Chamber::LA}] = {6.0, 75.0, 0.16, 0.94};
    q.gates[{View::a4c, Chamber::LV}] = {4.7, 104.0, 0.62, 0.96};
    q.gates[{View::a4c, Chamber::RV}] = {4.7, 104.0, 0.65, 0.96};
    q.gates[{View::a4c, Chamber::LA}] = {6.0, 75.0, 0.30, 0.96};
    q.gates[{View::a4c, Chamber::RA}] = {6.0, 75.0, 0.17, 0.95};
    q.gates[{View::sax, Chamber::LV}] = {4.7, 104.0, 0.0, 0.95};
    return q;
}

QcResult qc_filter(std::vector<Segment> segments, const QcConfig& config, View view) {
    QcResult out;
    for (auto& s : segments) {
        const ChamberGate* g = config.find(view, s.chamber);
        if (!g) {
            out.accepted.push_back(std::move(s));
            continue;
        }
        std::string reason;
        if (s.area_cm2 < g->area_min_cm2)
            reason = "area below gate";
        else if (s.area_cm2 > g->area_max_cm2)
            reason = "area above gate";
        else if (s.eccentricity < g->ecc_min)
            reason = "eccentricity below gate";
        else if (s.eccentricity > g->ecc_max)
            reason = "eccentricity above gate";
        if (reason.empty())
            out.accepted.push_back(std::move(s));
        else
            out.rejected.push_back({std::move(s), std::move(reason)});
    }
    return out;
}

std::optional<std::vector<Segment>> assign_chambers(std::vector<Segment> segments, View view,
                                                    bool mirrored) {
    auto col_of = [&](const Segment& s) { return mirrored ? -s.centroid_col : s.centroid_col; };
    switch (view) {
        case View::sax: {
            if (segments.size() != 1) return std::nullopt;
            segments[0].chamber = Chamber::LV;
            return segments;
        }
        case View::a2c: {
            if (segments.size() != 2) return std::nullopt;
            // Ventricle above (apex up), atrium below.
            if (segments[0].centroid_row > segments[1].centroid_row)
                std::swap(segments[0], segments[1]);
            segments[0].chamber = Chamber::LV;
            segments[1].chamber = Chamber::LA;
            return segments;
        }
        case View::a4c: {
            if (segments.size() != 4) return std::nullopt;
            std::sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) {
                return a.centroid_row < b.centroid_row;
            });
            // Top two are ventricles, bottom two atria; within each pair the
            // left-heart chamber sits at the larger screen column.
            auto order_pair = [&](Segment& a, Segment& b, Chamber left_heart, Chamber right_heart) {
                Segment* left = &a;
                Segment* right = &b;
                if (col_of(*left) > col_of(*right)) std::swap(left, right);
                right->chamber = left_heart;
                left->chamber = right_heart;
            };
            order_pair(segments[0], segments[1], Chamber::LV, Chamber::RV);
            order_pair(segments[2], segments[3], Chamber::LA, Chamber::RA);
            std::vector<Segment> out;
            for (Chamber want : {Chamber::LV, Chamber::LA, Chamber::RV, Chamber::RA})
                for (auto& s : segments)
                    if (s.chamber == want) out.push_back(std::move(s));
            return out;
        }
    }
    return std::nullopt;
}

namespace {

struct Bbox {
    int top, bottom, left, right;
    int height() const { return bottom - top + 1; }
    int width() const { return right - left + 1; }
};

Bbox bbox_of(const BinaryMask& m) {
    Bbox b{m.height, -1, m.width, -1};
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c)
            if (m.at(r, c)) {
                b.top = std::min(b.top, r);
                b.bottom = std::max(b.bottom, r);
                b.left = std::min(b.left, c);
                b.right = std::max(b.right, c);
            }
    return b;
}

// Nearest-neighbor vertical resample of the mask rows [src_top, src_top+src_h)
// onto [out_top, out_top+out_h), clipped to the image.
BinaryMask stretch_rows(const BinaryMask& mask, int src_top, int src_h, int out_top, int out_h) {
    BinaryMask out = BinaryMask::zeros(mask.width, mask.height, mask.spacing_mm);
    for (int r = std::max(0, out_top); r < std::min(mask.height, out_top + out_h); ++r) {
        int src_r;
        if (out_h == 1 || src_h == 1)
            src_r = src_top;
        else
            src_r = src_top + static_cast<int>(std::llround(static_cast<double>(r - out_top) *
                                                            (src_h - 1) / (out_h - 1)));
        for (int c = 0; c < mask.width; ++c)
            if (mask.at(src_r, c)) out.set(r, c, true);
    }
    return morphology(out, MorphOp::fill_holes);
}

}  // namespace

BinaryMask stretch_lv(const BinaryMask& lv) {
    if (lv.empty()) throw DegenerateInput("stretch_lv: empty mask");
    Bbox b = bbox_of(lv);
    double ratio = static_cast<double>(b.height()) / b.width();
    if (ratio >= 2.0) return lv;
    int out_h = static_cast<int>(std::llround(2.0 * b.width()));
    return stretch_rows(lv, b.top, b.height(), b.top, out_h);
}

BinaryMask stretch_rv(const BinaryMask& rv, const BinaryMask& lv, double height_ratio_gate) {
    if (rv.empty()) throw DegenerateInput("stretch_rv: empty RV mask");
    if (lv.empty()) throw DegenerateInput("stretch_rv: empty LV mask");
    if (rv.width != lv.width || rv.height != lv.height)
        throw std::invalid_argument("stretch_rv: mask dimensions mismatch");
    Bbox brv = bbox_of(rv);
    Bbox blv = bbox_of(lv);
    double ratio = static_cast<double>(brv.height()) / blv.height();
    if (ratio >= height_ratio_gate) return rv;
    int out_h = blv.height();
    // Anchor at the basal (bottom) row and grow toward the apex.
    return stretch_rows(rv, brv.top, brv.height(), brv.bottom - out_h + 1, out_h);
}

LabelMap myocardial_rind(const BinaryMask& lumen, const RindRanges& ranges, std::uint64_t seed) {
    if (ranges.dilate_min_px < 0 || ranges.dilate_min_px > ranges.dilate_max_px ||
        ranges.erode_min_px < 0 || ranges.erode_min_px > ranges.erode_max_px)
        throw std::invalid_argument("myocardial_rind: bad radius ranges");
    if (lumen.empty()) throw DegenerateInput("myocardial_rind: degenerate lumen");

    Rng rng(seed);
    int d = rng.uniform_int(ranges.dilate_min_px, ranges.dilate_max_px);
    int e = rng.uniform_int(ranges.erode_min_px, ranges.erode_max_px);

    BinaryMask core = morphology(lumen, MorphOp::erode, e);
    if (core.empty()) throw DegenerateInput("myocardial_rind: degenerate lumen");
    BinaryMask outer = morphology(lumen, MorphOp::dilate, d);

    LabelMap out = LabelMap::zeros(lumen.width, lumen.height, lumen.spacing_mm);
    for (std::size_t i = 0; i < out.classes.size(); ++i) {
        if (core.bits[i])
            out.classes[i] = static_cast<std::uint8_t>(Chamber::LV);
        else if (outer.bits[i])
            out.classes[i] = static_cast<std::uint8_t>(Chamber::LVMyo);
    }
    return out;
}

}  // namespace echoseg
