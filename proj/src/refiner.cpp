#include "echoseg/refiner.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace echoseg {

std::optional<std::size_t> elbow_index(const std::vector<double>& curve, double min_distance) {
    if (curve.size() < 3) throw std::invalid_argument("elbow_index: need at least 3 samples");
    if (min_distance < 0.0) throw std::invalid_argument("elbow_index: negative min_distance");

    std::size_t n = curve.size();
    double vmin = *std::min_element(curve.begin(), curve.end());
    double vmax = *std::max_element(curve.begin(), curve.end());
    double span = vmax - vmin;

    auto xs = [&](std::size_t i) { return static_cast<double>(i) / static_cast<double>(n - 1); };
    auto ys = [&](std::size_t i) { return span > 0.0 ? (curve[i] - vmin) / span : 0.0; };

    double ax = xs(0), ay = ys(0);
    double bx = xs(n - 1), by = ys(n - 1);
    double chord = std::sqrt((bx - ax) * (bx - ax) + (by - ay) * (by - ay));
    if (chord == 0.0) return std::nullopt;

    double best = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = std::fabs((xs(i) - ax) * (by - ay) - (ys(i) - ay) * (bx - ax)) / chord;
        if (d > best) {
            best = d;
            best_i = i;
        }
    }
    if (best < min_distance) return std::nullopt;
    return best_i;
}

ShapeAtlas::ShapeAtlas(AtlasParams params) : params_(params) {
    if (params_.grid_size < 8) throw std::invalid_argument("atlas: grid too small");
    if (!(params_.prob_threshold > 0.0 && params_.prob_threshold <= 1.0))
        throw std::invalid_argument("atlas: prob_threshold outside (0,1]");
    if (!(params_.dice_accept > 0.0 && params_.dice_accept <= 1.0))
        throw std::invalid_argument("atlas: dice_accept outside (0,1]");
}

double ShapeAtlas::unit_area_px() const {
    // Canonical chamber area; leaves room on the grid for shapes up to
    // roughly 4:1 elongation after scaling.
    double g = static_cast<double>(params_.grid_size);
    return g * g / 6.0;
}

namespace {

struct MaskStats {
    double centroid_row = 0.0, centroid_col = 0.0;
    std::size_t count = 0;
};

MaskStats mask_stats(const BinaryMask& m) {
    MaskStats s;
    double sr = 0.0, sc = 0.0;
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c)
            if (m.at(r, c)) {
                sr += r;
                sc += c;
                ++s.count;
            }
    if (s.count) {
        s.centroid_row = sr / static_cast<double>(s.count);
        s.centroid_col = sc / static_cast<double>(s.count);
    }
    return s;
}

}  // namespace

void ShapeAtlas::fit(const std::vector<TrainingPair>& pairs) {
    if (pairs.empty()) throw PipelineError("refiner untrainable");
    for (const auto& p : pairs)
        if (!p.frame || !p.label || p.frame->width != p.label->width ||
            p.frame->height != p.label->height)
            throw std::invalid_argument("atlas fit: bad training pair");

    int g = params_.grid_size;
    double a0 = unit_area_px();
    double half = (g - 1) / 2.0;

    std::map<Chamber, std::vector<double>> sums;
    std::map<Chamber, double> area_sums;
    std::map<Chamber, int> counts;
    double myo_ratio_sum = 0.0;
    int myo_ratio_n = 0;

    for (const auto& pair : pairs) {
        double lumen_area = 0.0, myo_area = 0.0;
        for (Chamber ch : pair.label->present_chambers()) {
            BinaryMask m = pair.label->mask_of(ch);
            MaskStats st = mask_stats(m);
            if (st.count == 0) continue;
            double s = std::sqrt(static_cast<double>(st.count) / a0);
            auto& sum = sums[ch];
            if (sum.empty()) sum.assign(static_cast<std::size_t>(g) * g, 0.0);
            for (int gr = 0; gr < g; ++gr) {
                double src_r = st.centroid_row + (gr - half) * s;
                int ir = static_cast<int>(std::llround(src_r));
                for (int gc = 0; gc < g; ++gc) {
                    double src_c = st.centroid_col + (gc - half) * s;
                    int ic = static_cast<int>(std::llround(src_c));
                    if (m.in_bounds(ir, ic) && m.at(ir, ic))
                        sum[static_cast<std::size_t>(gr) * g + gc] += 1.0;
                }
            }
            area_sums[ch] += static_cast<double>(st.count);
            counts[ch] += 1;
            if (ch == Chamber::LV) lumen_area = static_cast<double>(st.count);
            if (ch == Chamber::LVMyo) myo_area = static_cast<double>(st.count);
        }
        if (lumen_area > 0.0 && myo_area > 0.0) {
            myo_ratio_sum += myo_area / lumen_area;
            ++myo_ratio_n;
        }
    }
    if (sums.empty()) throw PipelineError("refiner untrainable");

    fields_.clear();
    for (auto& [ch, sum] : sums) {
        ChamberField f;
        f.pair_count = counts[ch];
        f.mean_area_px = area_sums[ch] / counts[ch];
        f.mean.resize(sum.size());
        for (std::size_t i = 0; i < sum.size(); ++i)
            f.mean[i] = static_cast<float>(sum[i] / counts[ch]);
        fields_[ch] = std::move(f);
    }
    myo_per_lumen_area_ = myo_ratio_n > 0 ? myo_ratio_sum / myo_ratio_n : 0.0;
}

std::optional<LabelMap> ShapeAtlas::predict(const Raster& frame) const {
    if (!fitted()) throw std::invalid_argument("atlas predict: not fitted");

    auto pool = binarize_clean(frame, params_.binarize);
    if (!pool) return std::nullopt;
    std::vector<Component> comps = connected_components(*pool);
    if (comps.empty()) return std::nullopt;

    int g = params_.grid_size;
    double a0 = unit_area_px();
    double half = (g - 1) / 2.0;

    // Projects a chamber field around (cr, cc) at scale s and collects the
    // thresholded shape pixels; optionally counts overlap with a component.
    auto project = [&](const ChamberField& f, double cr, double cc, double s,
                       const std::vector<std::uint8_t>* membership, std::size_t* inter,
                       std::vector<std::int32_t>* out_pixels) -> std::size_t {
        int r0 = std::max(0, static_cast<int>(std::floor(cr - half * s)));
        int r1 = std::min(frame.height - 1, static_cast<int>(std::ceil(cr + half * s)));
        int c0 = std::max(0, static_cast<int>(std::floor(cc - half * s)));
        int c1 = std::min(frame.width - 1, static_cast<int>(std::ceil(cc + half * s)));
        std::size_t n = 0;
        if (inter) *inter = 0;
        for (int r = r0; r <= r1; ++r) {
            int gr = static_cast<int>(std::llround((r - cr) / s + half));
            if (gr < 0 || gr >= g) continue;
            for (int c = c0; c <= c1; ++c) {
                int gc = static_cast<int>(std::llround((c - cc) / s + half));
                if (gc < 0 || gc >= g) continue;
                if (f.mean[static_cast<std::size_t>(gr) * g + gc] < params_.prob_threshold) continue;
                ++n;
                std::size_t idx = static_cast<std::size_t>(r) * frame.width + c;
                if (inter && (*membership)[idx]) ++(*inter);
                if (out_pixels) out_pixels->push_back(static_cast<std::int32_t>(idx));
            }
        }
        return n;
    };

    LabelMap out = LabelMap::zeros(frame.width, frame.height, frame.spacing_mm);
    bool any = false;
    std::vector<std::pair<const Component*, double>> lv_comps;  // for the myocardium ring

    for (const auto& comp : comps) {
        double cr = 0.0, cc = 0.0;
        for (auto p : comp.pixels) {
            cr += p / frame.width;
            cc += p % frame.width;
        }
        cr /= static_cast<double>(comp.size());
        cc /= static_cast<double>(comp.size());
        double s = std::sqrt(static_cast<double>(comp.size()) / a0);

        std::vector<std::uint8_t> membership(static_cast<std::size_t>(frame.width) * frame.height, 0);
        for (auto p : comp.pixels) membership[static_cast<std::size_t>(p)] = 1;

        double best_dice = -1.0;
        Chamber best_ch = Chamber::background;
        for (const auto& [ch, field] : fields_) {
            if (ch == Chamber::LVMyo) continue;  // ring is not a blood pool
            std::size_t inter = 0;
            std::size_t shape_n = project(field, cr, cc, s, &membership, &inter, nullptr);
            if (shape_n + comp.size() == 0) continue;
            double d = 2.0 * static_cast<double>(inter) /
                       static_cast<double>(shape_n + comp.size());
            if (d > best_dice) {
                best_dice = d;
                best_ch = ch;
            }
        }
        if (best_ch == Chamber::background || best_dice < params_.dice_accept) continue;

        // Label = projected shape restricted to the component, holes filled.
        BinaryMask shape = BinaryMask::zeros(frame.width, frame.height, frame.spacing_mm);
        std::vector<std::int32_t> shape_px;
        project(fields_.at(best_ch), cr, cc, s, nullptr, nullptr, &shape_px);
        for (auto p : shape_px)
            if (membership[static_cast<std::size_t>(p)]) shape.bits[static_cast<std::size_t>(p)] = 1;
        if (shape.empty()) continue;
        shape = morphology(shape, MorphOp::fill_holes);
        out.paint(shape, best_ch);
        any = true;
        if (best_ch == Chamber::LV) lv_comps.emplace_back(&comp, s);
    }
    if (!any) return std::nullopt;

    // Myocardium ring around accepted LV lumens, scaled by the learned
    // ring-to-lumen area ratio.
    auto myo_it = fields_.find(Chamber::LVMyo);
    if (myo_it != fields_.end() && myo_per_lumen_area_ > 0.0) {
        for (const auto& [comp, s_lumen] : lv_comps) {
            double cr = 0.0, cc = 0.0;
            for (auto p : comp->pixels) {
                cr += p / frame.width;
                cc += p % frame.width;
            }
            cr /= static_cast<double>(comp->size());
            cc /= static_cast<double>(comp->size());
            double s =
                std::sqrt(static_cast<double>(comp->size()) * myo_per_lumen_area_ / a0);
            std::vector<std::int32_t> ring_px;
            project(myo_it->second, cr, cc, s, nullptr, nullptr, &ring_px);
            for (auto p : ring_px) {
                std::size_t idx = static_cast<std::size_t>(p);
                if (out.classes[idx] == static_cast<std::uint8_t>(Chamber::background))
                    out.classes[idx] = static_cast<std::uint8_t>(Chamber::LVMyo);
            }
        }
    }
    return out;
}

std::string ShapeAtlas::to_json_string() const {
    nlohmann::json j;
    j["grid_size"] = params_.grid_size;
    j["prob_threshold"] = params_.prob_threshold;
    j["dice_accept"] = params_.dice_accept;
    j["binarize"] = {{"threshold", params_.binarize.threshold},
                     {"min_region_px", params_.binarize.min_region_px},
                     {"max_hole_px", params_.binarize.max_hole_px}};
    j["myo_per_lumen_area"] = myo_per_lumen_area_;
    nlohmann::json chambers = nlohmann::json::object();
    for (const auto& [ch, f] : fields_) {
        nlohmann::json cj;
        cj["pair_count"] = f.pair_count;
        cj["mean_area_px"] = f.mean_area_px;
        cj["field"] = f.mean;
        chambers[chamber_name(ch)] = std::move(cj);
    }
    j["chambers"] = std::move(chambers);
    return j.dump();
}

ShapeAtlas ShapeAtlas::from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("atlas model: invalid JSON: ") + e.what());
    }
    try {
        AtlasParams p;
        p.grid_size = j.at("grid_size").get<int>();
        p.prob_threshold = j.at("prob_threshold").get<double>();
        p.dice_accept = j.at("dice_accept").get<double>();
        p.binarize.threshold = j.at("binarize").at("threshold").get<double>();
        p.binarize.min_region_px = j.at("binarize").at("min_region_px").get<int>();
        p.binarize.max_hole_px = j.at("binarize").at("max_hole_px").get<int>();
        ShapeAtlas atlas(p);
        atlas.myo_per_lumen_area_ = j.at("myo_per_lumen_area").get<double>();
        for (const auto& [name, cj] : j.at("chambers").items()) {
            Chamber ch;
            bool found = false;
            for (int i = 1; i <= 5; ++i)
                if (name == chamber_name(static_cast<Chamber>(i))) {
                    ch = static_cast<Chamber>(i);
                    found = true;
                }
            if (!found) throw DataError("atlas model: unknown chamber " + name);
            ChamberField f;
            f.pair_count = cj.at("pair_count").get<int>();
            f.mean_area_px = cj.at("mean_area_px").get<double>();
            f.mean = cj.at("field").get<std::vector<float>>();
            if (f.mean.size() != static_cast<std::size_t>(p.grid_size) * p.grid_size)
                throw DataError("atlas model: field size mismatch");
            atlas.fields_[ch] = std::move(f);
        }
        if (atlas.fields_.empty()) throw DataError("atlas model: no chambers");
        return atlas;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("atlas model: missing or bad field: ") + e.what());
    }
}

}  // namespace echoseg
