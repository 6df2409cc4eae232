#include "echoseg/measure.hpp"

#include <algorithm>
#include <cmath>

namespace echoseg {

std::optional<ChamberGeometry> chamber_geometry(const LabelMap& label, Chamber chamber,
                                                int n_disks) {
    if (n_disks < 1) throw std::invalid_argument("chamber_geometry: n_disks must be >= 1");
    std::vector<Point> px;
    for (int r = 0; r < label.height; ++r)
        for (int c = 0; c < label.width; ++c)
            if (label.at(r, c) == chamber) px.push_back({r, c});
    if (px.empty()) return std::nullopt;

    double n = static_cast<double>(px.size());
    double cr = 0.0, cc = 0.0;
    for (const auto& p : px) {
        cr += p.row;
        cc += p.col;
    }
    cr /= n;
    cc /= n;

    double mrr = 0.0, mcc = 0.0, mrc = 0.0;
    for (const auto& p : px) {
        double dr = p.row - cr, dc = p.col - cc;
        mrr += dr * dr;
        mcc += dc * dc;
        mrc += dr * dc;
    }
    mrr /= n;
    mcc /= n;
    mrc /= n;

    // Major principal axis of the second-moment matrix, oriented apex
    // (low row) to base (high row).
    double tr2 = (mrr + mcc) / 2.0;
    double det = std::sqrt(std::max(0.0, (mrr - mcc) * (mrr - mcc) / 4.0 + mrc * mrc));
    double lmaj = tr2 + det;
    double ur, uc;
    if (std::fabs(mrc) > 1e-12) {
        ur = lmaj - mcc;
        uc = mrc;
    } else if (mrr >= mcc) {
        ur = 1.0;
        uc = 0.0;
    } else {
        ur = 0.0;
        uc = 1.0;
    }
    double norm = std::sqrt(ur * ur + uc * uc);
    ur /= norm;
    uc /= norm;
    if (ur < 0.0 || (ur == 0.0 && uc < 0.0)) {
        ur = -ur;
        uc = -uc;
    }
    double vr = -uc, vc = ur;  // perpendicular axis

    double tmin = 1e300, tmax = -1e300;
    std::vector<double> t(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
        t[i] = (px[i].row - cr) * ur + (px[i].col - cc) * uc;
        tmin = std::min(tmin, t[i]);
        tmax = std::max(tmax, t[i]);
    }
    if (tmax - tmin <= 0.0) {
        if (px.size() == 1)
            throw DegenerateInput("chamber_geometry: degenerate chamber");
        // All pixels project to one point only for a zero-extent axis.
        throw DegenerateInput("chamber_geometry: degenerate chamber");
    }

    double cm_per_px = label.spacing_mm / 10.0;
    ChamberGeometry g;
    g.chamber = chamber;
    g.area_cm2 = n * cm_per_px * cm_per_px;
    g.length_cm = (tmax - tmin + 1.0) * cm_per_px;  // +1: pixel footprint

    // Diameter at each station: perpendicular extent of the one-pixel-thick
    // cross-section through it. Stations sit at the disk centers.
    double step = (tmax - tmin) / n_disks;
    g.disk_diameters_cm.resize(static_cast<std::size_t>(n_disks), 0.0);
    for (int i = 0; i < n_disks; ++i) {
        double station = tmin + (static_cast<double>(i) + 0.5) * step;
        double wmin = 1e300, wmax = -1e300;
        for (std::size_t j = 0; j < px.size(); ++j) {
            if (std::fabs(t[j] - station) > 0.5) continue;
            double s = (px[j].row - cr) * vr + (px[j].col - cc) * vc;
            wmin = std::min(wmin, s);
            wmax = std::max(wmax, s);
        }
        if (wmax >= wmin)
            g.disk_diameters_cm[static_cast<std::size_t>(i)] = (wmax - wmin + 1.0) * cm_per_px;
    }
    return g;
}

double biplane_volume(const ChamberGeometry& plane_a, const ChamberGeometry& plane_b) {
    if (plane_a.disk_diameters_cm.empty() ||
        plane_a.disk_diameters_cm.size() != plane_b.disk_diameters_cm.size())
        throw std::invalid_argument("biplane_volume: disk count mismatch");
    if (plane_a.length_cm <= 0.0 || plane_b.length_cm <= 0.0)
        throw std::invalid_argument("biplane_volume: non-positive length");
    double len = std::max(plane_a.length_cm, plane_b.length_cm);
    double n = static_cast<double>(plane_a.disk_diameters_cm.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < plane_a.disk_diameters_cm.size(); ++i)
        acc += plane_a.disk_diameters_cm[i] * plane_b.disk_diameters_cm[i];
    return M_PI / 4.0 * acc * len / n;
}

double single_plane_volume(const ChamberGeometry& plane) {
    if (plane.disk_diameters_cm.empty())
        throw std::invalid_argument("single_plane_volume: no disks");
    if (plane.length_cm <= 0.0) throw std::invalid_argument("single_plane_volume: non-positive length");
    double n = static_cast<double>(plane.disk_diameters_cm.size());
    double acc = 0.0;
    for (double d : plane.disk_diameters_cm) acc += d * d;
    return M_PI / 4.0 * acc * plane.length_cm / n;
}

double ejection_fraction(double edv_ml, double esv_ml) {
    if (edv_ml <= 0.0) throw std::invalid_argument("ejection_fraction: EDV must be positive");
    return 100.0 * (edv_ml - esv_ml) / edv_ml;
}

double lv_mass_area_length(double a1_cm2, double a2_cm2, double a_plus_d_cm,
                           std::optional<double> wall_thickness_cm) {
    if (a1_cm2 <= 0.0 || a2_cm2 < 0.0 || a1_cm2 < a2_cm2)
        throw std::invalid_argument("lv_mass: bad areas");
    if (a_plus_d_cm <= 0.0) throw std::invalid_argument("lv_mass: bad length");
    double t = wall_thickness_cm ? *wall_thickness_cm
                                 : std::sqrt(a1_cm2 / M_PI) - std::sqrt(a2_cm2 / M_PI);
    return 1.05 * (5.0 / 6.0) * (a1_cm2 * (a_plus_d_cm + t) - a2_cm2 * a_plus_d_cm);
}

double index_by_bsa(double value, double bsa_m2) {
    if (bsa_m2 <= 0.0) throw std::invalid_argument("index_by_bsa: BSA must be positive");
    return value / bsa_m2;
}

std::optional<EdEsPick> find_ed_es(const std::vector<VideoAreas>& videos) {
    bool any = false;
    for (const auto& v : videos) any = any || !v.areas.empty();
    if (!any) throw std::invalid_argument("find_ed_es: no areas");

    const VideoAreas* best_video = nullptr;
    int best_frame = 0;
    double best_area = -1.0;
    for (const auto& v : videos)
        for (const auto& [frame, area] : v.areas)
            if (area > best_area) {
                best_area = area;
                best_video = &v;
                best_frame = frame;
            }

    double min_area = 1e300;
    int min_frame = 0;
    for (const auto& [frame, area] : best_video->areas)
        if (area < min_area) {
            min_area = area;
            min_frame = frame;
        }
    if (min_area >= best_area) return std::nullopt;  // flat series: no contraction

    EdEsPick pick;
    pick.video_id = best_video->video_id;
    pick.ed_frame = best_frame;
    pick.es_frame = min_frame;
    pick.ed_value = best_area;
    pick.es_value = min_area;
    return pick;
}

namespace {

double chamber_area_cm2(const LabelMap& label, Chamber c) {
    double cm_per_px = label.spacing_mm / 10.0;
    std::size_t n = 0;
    for (auto v : label.classes)
        if (v == static_cast<std::uint8_t>(c)) ++n;
    return static_cast<double>(n) * cm_per_px * cm_per_px;
}

// Area series per video for one chamber in one view.
std::vector<VideoAreas> area_series(const std::vector<MeasuredFrame>& frames, View view,
                                    Chamber chamber) {
    std::vector<VideoAreas> out;
    for (const auto& f : frames) {
        if (f.view != view || !f.label) continue;
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const VideoAreas& v) { return v.video_id == f.video_id; });
        if (it == out.end()) {
            out.push_back({f.video_id, {}});
            it = out.end() - 1;
        }
        it->areas.emplace_back(f.frame_index, chamber_area_cm2(*f.label, chamber));
    }
    for (auto& v : out)
        std::sort(v.areas.begin(), v.areas.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

const LabelMap* frame_label(const std::vector<MeasuredFrame>& frames, View view,
                            const std::string& video_id, int frame_index) {
    for (const auto& f : frames)
        if (f.view == view && f.video_id == video_id && f.frame_index == frame_index)
            return f.label;
    return nullptr;
}

struct PhasePair {
    std::optional<ChamberGeometry> ed, es;
};

// ED/ES geometries of one chamber in one view, when the pick exists.
PhasePair phase_geometries(const std::vector<MeasuredFrame>& frames, View view, Chamber chamber,
                           int n_disks, std::vector<std::string>& warnings) {
    PhasePair out;
    auto series = area_series(frames, view, chamber);
    if (series.empty()) return out;
    bool all_empty = true;
    for (const auto& v : series)
        for (const auto& [frame, area] : v.areas) all_empty = all_empty && area <= 0.0;
    if (all_empty) return out;
    auto pick = find_ed_es(series);
    if (!pick) {
        warnings.push_back(std::string("no contraction visible for ") + chamber_name(chamber) +
                           " in " + view_name(view));
        return out;
    }
    const LabelMap* ed = frame_label(frames, view, pick->video_id, pick->ed_frame);
    const LabelMap* es = frame_label(frames, view, pick->video_id, pick->es_frame);
    try {
        if (ed) out.ed = chamber_geometry(*ed, chamber, n_disks);
        if (es) out.es = chamber_geometry(*es, chamber, n_disks);
    } catch (const DegenerateInput&) {
        warnings.push_back(std::string("degenerate ") + chamber_name(chamber) + " geometry in " +
                           view_name(view));
    }
    return out;
}

}  // namespace

MeasurementSet measure_study(const std::vector<MeasuredFrame>& frames,
                             std::optional<double> bsa_m2, int n_disks) {
    MeasurementSet out;
    auto& vals = out.values;

    PhasePair lv2 = phase_geometries(frames, View::a2c, Chamber::LV, n_disks, out.warnings);
    PhasePair lv4 = phase_geometries(frames, View::a4c, Chamber::LV, n_disks, out.warnings);

    auto volume_of = [&](const std::optional<ChamberGeometry>& a,
                         const std::optional<ChamberGeometry>& b) -> std::optional<double> {
        if (a && b) return biplane_volume(*a, *b);
        if (a) return single_plane_volume(*a);
        if (b) return single_plane_volume(*b);
        return std::nullopt;
    };

    if (auto edv = volume_of(lv2.ed, lv4.ed)) vals["lvedv_ml"] = *edv;
    if (auto esv = volume_of(lv2.es, lv4.es)) vals["lvesv_ml"] = *esv;
    if (vals.count("lvedv_ml") && vals.count("lvesv_ml")) {
        if (vals["lvesv_ml"] > vals["lvedv_ml"])
            out.warnings.push_back("LVESV exceeds LVEDV");
        double ef = ejection_fraction(vals["lvedv_ml"], vals["lvesv_ml"]);
        vals["lvef_pct"] = ef;
        if (ef < 0.0 || ef > 100.0) out.warnings.push_back("LVEF outside [0,100]");
    }

    // Atrial volumes at maximal atrial area (the atrial "ED" pick).
    PhasePair la2 = phase_geometries(frames, View::a2c, Chamber::LA, n_disks, out.warnings);
    PhasePair la4 = phase_geometries(frames, View::a4c, Chamber::LA, n_disks, out.warnings);
    if (auto la = volume_of(la2.ed, la4.ed)) vals["la_vol_ml"] = *la;
    PhasePair ra4 = phase_geometries(frames, View::a4c, Chamber::RA, n_disks, out.warnings);
    if (ra4.ed) vals["ra_vol_ml"] = single_plane_volume(*ra4.ed);

    // RV areas come straight from the ED/ES picks.
    {
        auto series = area_series(frames, View::a4c, Chamber::RV);
        bool any = false;
        for (const auto& v : series)
            for (const auto& [frame, area] : v.areas) any = any || area > 0.0;
        if (any) {
            if (auto pick = find_ed_es(series)) {
                vals["rveda_cm2"] = pick->ed_value;
                vals["rvesa_cm2"] = pick->es_value;
            } else {
                out.warnings.push_back("no contraction visible for rv in a4c");
            }
        }
    }

    // Short-axis LV mass at the frame with the largest lumen.
    {
        std::vector<MeasuredFrame> sax;
        for (const auto& f : frames)
            if (f.view == View::sax && f.label) sax.push_back(f);
        auto series = area_series(sax, View::sax, Chamber::LV);
        bool any = false;
        for (const auto& v : series)
            for (const auto& [frame, area] : v.areas) any = any || area > 0.0;
        if (any) {
            const VideoAreas* best_v = nullptr;
            int best_f = 0;
            double best_a = -1.0;
            for (const auto& v : series)
                for (const auto& [frame, area] : v.areas)
                    if (area > best_a) {
                        best_a = area;
                        best_v = &v;
                        best_f = frame;
                    }
            const LabelMap* label = frame_label(sax, View::sax, best_v->video_id, best_f);
            double a2 = chamber_area_cm2(*label, Chamber::LV);
            double a1 = a2 + chamber_area_cm2(*label, Chamber::LVMyo);
            std::optional<double> axis;
            if (lv2.ed) axis = lv2.ed->length_cm;
            if (lv4.ed) axis = std::max(axis.value_or(0.0), lv4.ed->length_cm);
            if (a1 > a2 && axis) {
                vals["lv_mass_g"] = lv_mass_area_length(a1, a2, *axis);
            } else if (a1 <= a2) {
                out.warnings.push_back("short-axis frame has no myocardium class");
            } else {
                out.warnings.push_back("lv mass needs a long-axis LV length");
            }
        }
    }

    if (bsa_m2) {
        if (*bsa_m2 <= 0.0) throw std::invalid_argument("measure_study: BSA must be positive");
        static const char* kIndexed[] = {"lvedv_ml", "lvesv_ml", "lv_mass_g", "la_vol_ml",
                                         "ra_vol_ml", "rveda_cm2", "rvesa_cm2"};
        for (const char* key : kIndexed)
            if (vals.count(key)) vals[std::string(key) + "_per_m2"] = index_by_bsa(vals[key], *bsa_m2);
    }
    return out;
}

}  // namespace echoseg
