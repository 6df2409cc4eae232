#include "echoseg/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "echoseg/common.hpp"
#include "echoseg/stats.hpp"

namespace echoseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_file(const fs::path& path) {
    const std::string text = read_file_bytes(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    atomic_write_file(path, j.dump(2) + "\n");
}

fs::path sidecar_path(const fs::path& pgm_path) {
    fs::path p = pgm_path;
    p.replace_extension(".json");
    return p;
}

// ---------------------------------------------------------------------------
// P5 parsing with byte-offset errors
// ---------------------------------------------------------------------------

struct PgmData {
    int width = 0;
    int height = 0;
    std::size_t data_offset = 0;
    std::string bytes;
};

void skip_space_and_comments(const std::string& s, std::size_t& pos) {
    while (pos < s.size()) {
        if (std::isspace(static_cast<unsigned char>(s[pos]))) {
            ++pos;
        } else if (s[pos] == '#') {
            while (pos < s.size() && s[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
}

long parse_pnm_int(const fs::path& path, const std::string& s, std::size_t& pos) {
    skip_space_and_comments(s, pos);
    std::size_t start = pos;
    long v = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
        v = v * 10 + (s[pos] - '0');
        if (v > 1'000'000'000L)
            throw DataError(path.string() + ": malformed header at byte " + std::to_string(pos));
        ++pos;
    }
    if (pos == start)
        throw DataError(path.string() + ": malformed header at byte " + std::to_string(pos));
    return v;
}

PgmData read_pgm(const fs::path& path) {
    PgmData out;
    out.bytes = read_file_bytes(path);
    const std::string& s = out.bytes;
    if (s.size() < 2 || s[0] != 'P' || s[1] != '5')
        throw DataError(path.string() + ": not a P5 pgm (bad magic at byte 0)");
    std::size_t pos = 2;
    const long w = parse_pnm_int(path, s, pos);
    const long h = parse_pnm_int(path, s, pos);
    const long maxval = parse_pnm_int(path, s, pos);
    if (w <= 0 || h <= 0)
        throw DataError(path.string() + ": malformed header at byte " + std::to_string(pos));
    if (maxval != 255)
        throw DataError(path.string() + ": unsupported maxval " + std::to_string(maxval) +
                        " (want 255)");
    if (pos >= s.size() || !std::isspace(static_cast<unsigned char>(s[pos])))
        throw DataError(path.string() + ": malformed header at byte " + std::to_string(pos));
    ++pos;  // single whitespace separates header and data
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (s.size() - pos < need)
        throw DataError(path.string() + ": truncated pixel data at byte " + std::to_string(s.size()) +
                        ": have " + std::to_string(s.size() - pos) + " of " + std::to_string(need) +
                        " pixel bytes");
    out.width = static_cast<int>(w);
    out.height = static_cast<int>(h);
    out.data_offset = pos;
    return out;
}

std::string pgm_bytes(int width, int height, const std::vector<std::uint8_t>& data) {
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(data.data()), data.size());
    return out;
}

json sector_to_json(const SectorGeometry& s) {
    return json{{"apex_row", s.apex_row},
                {"apex_col", s.apex_col},
                {"opening_angle_deg", s.opening_angle_deg},
                {"depth_px", s.depth_px}};
}

SectorGeometry sector_from_json(const fs::path& where, const json& j) {
    try {
        SectorGeometry s;
        s.apex_row = j.at("apex_row").get<double>();
        s.apex_col = j.at("apex_col").get<double>();
        s.opening_angle_deg = j.at("opening_angle_deg").get<double>();
        s.depth_px = j.at("depth_px").get<double>();
        return s;
    } catch (const json::exception& e) {
        throw DataError(where.string() + ": bad sector geometry: " + e.what());
    }
}

json load_sidecar(const fs::path& pgm_path) {
    const fs::path sc = sidecar_path(pgm_path);
    if (!fs::exists(sc))
        throw DataError(pgm_path.string() + ": missing sidecar " + sc.string());
    return parse_json_file(sc);
}

double sidecar_spacing(const fs::path& pgm_path, const json& sc) {
    if (!sc.contains("spacing_mm") || !sc["spacing_mm"].is_number())
        throw DataError(pgm_path.string() + ": invalid spacing in sidecar");
    const double spacing = sc["spacing_mm"].get<double>();
    if (!(spacing > 0.0)) throw DataError(pgm_path.string() + ": invalid spacing");
    return spacing;
}

}  // namespace

void atomic_write_file(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_frame(const fs::path& pgm_path, const Raster& img, const FrameExtras& extras) {
    std::vector<std::uint8_t> data(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const double v = std::clamp(static_cast<double>(img.pixels[i]), 0.0, 1.0);
        data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    atomic_write_file(pgm_path, pgm_bytes(img.width, img.height, data));

    json sc{{"spacing_mm", img.spacing_mm}, {"sector", sector_to_json(img.sector)}};
    if (extras.view) sc["view"] = *extras.view;
    if (extras.fps) sc["fps"] = *extras.fps;
    if (extras.hr_bpm) sc["hr_bpm"] = *extras.hr_bpm;
    write_json_file(sidecar_path(pgm_path), sc);
}

std::pair<Raster, FrameExtras> read_frame(const fs::path& pgm_path) {
    const PgmData pgm = read_pgm(pgm_path);
    const json sc = load_sidecar(pgm_path);
    const double spacing = sidecar_spacing(pgm_path, sc);
    SectorGeometry sector;
    if (sc.contains("sector")) sector = sector_from_json(pgm_path, sc["sector"]);

    Raster img = Raster::zeros(pgm.width, pgm.height, spacing, sector);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] =
            static_cast<float>(static_cast<std::uint8_t>(pgm.bytes[pgm.data_offset + i]) / 255.0);

    FrameExtras extras;
    try {
        if (sc.contains("view")) extras.view = sc["view"].get<std::string>();
        if (sc.contains("fps")) extras.fps = sc["fps"].get<double>();
        if (sc.contains("hr_bpm")) extras.hr_bpm = sc["hr_bpm"].get<double>();
    } catch (const json::exception& e) {
        throw DataError(pgm_path.string() + ": bad sidecar field: " + e.what());
    }
    return {std::move(img), std::move(extras)};
}

void write_labelmap(const fs::path& pgm_path, const LabelMap& label) {
    std::vector<std::uint8_t> data(label.classes.size());
    for (std::size_t i = 0; i < label.classes.size(); ++i)
        data[i] = static_cast<std::uint8_t>(label.classes[i] * 50);
    atomic_write_file(pgm_path, pgm_bytes(label.width, label.height, data));
    write_json_file(sidecar_path(pgm_path), json{{"spacing_mm", label.spacing_mm}});
}

LabelMap read_labelmap(const fs::path& pgm_path) {
    const PgmData pgm = read_pgm(pgm_path);
    const json sc = load_sidecar(pgm_path);
    const double spacing = sidecar_spacing(pgm_path, sc);

    LabelMap label = LabelMap::zeros(pgm.width, pgm.height, spacing);
    for (std::size_t i = 0; i < label.classes.size(); ++i) {
        const int code = static_cast<std::uint8_t>(pgm.bytes[pgm.data_offset + i]);
        if (code % 50 != 0 || code > 250)
            throw DataError(pgm_path.string() + ": unknown class code " + std::to_string(code));
        label.classes[i] = static_cast<std::uint8_t>(code / 50);
    }
    return label;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string>& valid_splits() {
    static const std::set<std::string> splits{"train", "val", "test"};
    return splits;
}

}  // namespace

StudyManifest load_manifest(const fs::path& path) {
    const json j = parse_json_file(path);
    StudyManifest m;
    m.root = path.has_parent_path() ? path.parent_path() : fs::path(".");

    try {
        // Intermediate temporaries from value() must outlive the loops that
        // iterate them, hence the named copies.
        const json patients = j.value("patients", json::array());
        for (const auto& pj : patients) {
            PatientRecord p;
            p.patient_id = pj.at("patient_id").get<std::string>();
            if (pj.contains("bsa_m2")) p.bsa_m2 = pj["bsa_m2"].get<double>();
            if (pj.contains("sex")) p.sex = pj["sex"].get<std::string>();
            const json ref = pj.value("reference", json::object());
            for (const auto& [k, v] : ref.items()) p.reference[k] = v.get<double>();
            if (!m.patients.emplace(p.patient_id, std::move(p)).second)
                throw DataError(path.string() + ": duplicate patient " + pj.at("patient_id").get<std::string>());
        }
        for (const auto& fj : j.at("frames")) {
            FrameRecord f;
            f.patient_id = fj.at("patient_id").get<std::string>();
            f.study_id = fj.at("study_id").get<std::string>();
            f.video_id = fj.at("video_id").get<std::string>();
            f.frame_index = fj.at("frame_index").get<int>();
            if (f.frame_index < 0)
                throw DataError(path.string() + ": negative frame_index in " + f.video_id);
            const std::string view = fj.at("view").get<std::string>();
            auto v = view_from_name(view);
            if (!v) throw DataError(path.string() + ": unknown view \"" + view + "\"");
            f.view = *v;
            if (fj.contains("fps")) f.fps = fj["fps"].get<double>();
            if (fj.contains("hr_bpm")) f.hr_bpm = fj["hr_bpm"].get<double>();
            f.split = fj.at("split").get<std::string>();
            if (!valid_splits().count(f.split))
                throw DataError(path.string() + ": unknown split \"" + f.split + "\"");
            f.image = fs::path(fj.at("image").get<std::string>());
            if (fj.contains("truth")) f.truth = fs::path(fj["truth"].get<std::string>());
            m.frames.push_back(std::move(f));
        }
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }

    std::set<std::string> keys;
    std::map<std::string, std::string> patient_split;
    for (const auto& f : m.frames) {
        if (!keys.insert(f.frame_key()).second)
            throw DataError(path.string() + ": duplicate frame " + f.frame_key());
        auto [it, fresh] = patient_split.emplace(f.patient_id, f.split);
        if (!fresh && it->second != f.split)
            throw DataError(path.string() + ": patient " + f.patient_id + " appears in splits " +
                            it->second + " and " + f.split);
    }
    return m;
}

void save_manifest(const StudyManifest& manifest, const fs::path& path) {
    json patients = json::array();
    for (const auto& [id, p] : manifest.patients) {
        json pj{{"patient_id", p.patient_id}};
        if (p.bsa_m2) pj["bsa_m2"] = *p.bsa_m2;
        if (p.sex) pj["sex"] = *p.sex;
        if (!p.reference.empty()) pj["reference"] = p.reference;
        patients.push_back(std::move(pj));
    }
    json frames = json::array();
    for (const auto& f : manifest.frames) {
        json fj{{"patient_id", f.patient_id},   {"study_id", f.study_id},
                {"video_id", f.video_id},       {"frame_index", f.frame_index},
                {"view", view_name(f.view)},    {"split", f.split},
                {"image", f.image.generic_string()}};
        if (f.fps) fj["fps"] = *f.fps;
        if (f.hr_bpm) fj["hr_bpm"] = *f.hr_bpm;
        if (f.truth) fj["truth"] = f.truth->generic_string();
        frames.push_back(std::move(fj));
    }
    write_json_file(path, json{{"patients", patients}, {"frames", frames}});
}

CycleSelection select_first_cycle(const std::vector<FrameRecord>& video_frames) {
    CycleSelection out;
    if (video_frames.empty()) return out;
    const auto& first = video_frames.front();
    if (!first.fps || !first.hr_bpm || *first.fps <= 0.0 || *first.hr_bpm <= 0.0) {
        out.frames = video_frames;
        out.warned = true;
        return out;
    }
    const int keep = static_cast<int>(std::ceil(*first.fps * 60.0 / *first.hr_bpm));
    for (const auto& f : video_frames)
        if (f.frame_index < keep) out.frames.push_back(f);
    return out;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

void check_keys(const fs::path& path, const std::string& section, const json& j,
                const std::set<std::string>& allowed) {
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k))
            throw DataError(path.string() + ": unknown config key " + section + "." + k);
}

template <typename T>
void take(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

RunConfig load_config(const std::optional<fs::path>& path) {
    RunConfig cfg;
    if (!path) return cfg;
    const json j = parse_json_file(*path);
    if (!j.is_object()) throw DataError(path->string() + ": config must be a JSON object");

    static const std::set<std::string> sections{"raster",   "binarize", "seeds", "filters",
                                                "hough",    "qc",       "pipeline", "atlas",
                                                "rind",     "measure",  "stats", "classify",
                                                "phantom"};
    for (const auto& [k, v] : j.items())
        if (!sections.count(k))
            throw DataError(path->string() + ": unknown config section " + k);

    try {
        if (j.contains("raster")) {
            const json& s = j["raster"];
            check_keys(*path, "raster", s, {"target_spacing_mm", "target_size"});
            take(s, "target_spacing_mm", cfg.target_spacing_mm);
            take(s, "target_size", cfg.target_size);
        }
        if (j.contains("binarize")) {
            const json& s = j["binarize"];
            check_keys(*path, "binarize", s, {"threshold", "min_region_px", "max_hole_px"});
            take(s, "threshold", cfg.pipeline.binarize.threshold);
            take(s, "min_region_px", cfg.pipeline.binarize.min_region_px);
            take(s, "max_hole_px", cfg.pipeline.binarize.max_hole_px);
            cfg.pipeline.atlas.binarize = cfg.pipeline.binarize;
        }
        if (j.contains("seeds")) {
            const json& s = j["seeds"];
            check_keys(*path, "seeds", s, {"min_distance_px"});
            take(s, "min_distance_px", cfg.pipeline.seed_min_distance_px);
        }
        if (j.contains("filters")) {
            const json& s = j["filters"];
            check_keys(*path, "filters", s,
                       {"bilateral_sigma_spatial_px", "bilateral_sigma_range", "median_kernel",
                        "laplacian_kernel"});
            take(s, "bilateral_sigma_spatial_px", cfg.pipeline.bilateral_sigma_spatial_px);
            take(s, "bilateral_sigma_range", cfg.pipeline.bilateral_sigma_range);
            take(s, "median_kernel", cfg.pipeline.median_kernel);
            take(s, "laplacian_kernel", cfg.pipeline.laplacian_kernel);
        }
        if (j.contains("hough")) {
            const json& s = j["hough"];
            check_keys(*path, "hough", s,
                       {"radius_min_px", "radius_max_px", "min_center_distance_px",
                        "vote_floor_fraction", "edge_percentile"});
            take(s, "radius_min_px", cfg.pipeline.hough.radius_min_px);
            take(s, "radius_max_px", cfg.pipeline.hough.radius_max_px);
            take(s, "min_center_distance_px", cfg.pipeline.hough.min_center_distance_px);
            take(s, "vote_floor_fraction", cfg.pipeline.hough.vote_floor_fraction);
            take(s, "edge_percentile", cfg.pipeline.hough.edge_percentile);
        }
        if (j.contains("qc")) {
            for (const auto& [vname, chambers] : j["qc"].items()) {
                auto view = view_from_name(vname);
                if (!view) throw DataError(path->string() + ": unknown config key qc." + vname);
                for (const auto& [cname, gate] : chambers.items()) {
                    Chamber chamber;
                    if (cname == "lv") chamber = Chamber::LV;
                    else if (cname == "la") chamber = Chamber::LA;
                    else if (cname == "rv") chamber = Chamber::RV;
                    else if (cname == "ra") chamber = Chamber::RA;
                    else if (cname == "lv_myo") chamber = Chamber::LVMyo;
                    else throw DataError(path->string() + ": unknown config key qc." + vname + "." + cname);
                    check_keys(*path, "qc." + vname + "." + cname, gate,
                               {"area_min_cm2", "area_max_cm2", "ecc_min", "ecc_max"});
                    ChamberGate& g = cfg.pipeline.qc.gates[{*view, chamber}];
                    take(gate, "area_min_cm2", g.area_min_cm2);
                    take(gate, "area_max_cm2", g.area_max_cm2);
                    take(gate, "ecc_min", g.ecc_min);
                    take(gate, "ecc_max", g.ecc_max);
                }
            }
        }
        if (j.contains("pipeline")) {
            const json& s = j["pipeline"];
            check_keys(*path, "pipeline", s,
                       {"ring_dilate_px", "ring_erode_px", "rv_height_ratio_gate",
                        "annulus_halfwidth_px", "contour_median_window", "mirrored", "seed",
                        "first_cycle_only"});
            take(s, "ring_dilate_px", cfg.pipeline.ring_dilate_px);
            take(s, "ring_erode_px", cfg.pipeline.ring_erode_px);
            take(s, "rv_height_ratio_gate", cfg.pipeline.rv_height_ratio_gate);
            take(s, "annulus_halfwidth_px", cfg.pipeline.annulus_halfwidth_px);
            take(s, "contour_median_window", cfg.pipeline.contour_median_window);
            take(s, "mirrored", cfg.pipeline.mirrored);
            take(s, "seed", cfg.pipeline.seed);
            take(s, "first_cycle_only", cfg.first_cycle_only);
        }
        if (j.contains("atlas")) {
            const json& s = j["atlas"];
            check_keys(*path, "atlas", s, {"grid_size", "prob_threshold", "dice_accept"});
            take(s, "grid_size", cfg.pipeline.atlas.grid_size);
            take(s, "prob_threshold", cfg.pipeline.atlas.prob_threshold);
            take(s, "dice_accept", cfg.pipeline.atlas.dice_accept);
        }
        if (j.contains("rind")) {
            const json& s = j["rind"];
            check_keys(*path, "rind", s,
                       {"dilate_min_px", "dilate_max_px", "erode_min_px", "erode_max_px"});
            take(s, "dilate_min_px", cfg.pipeline.rind.dilate_min_px);
            take(s, "dilate_max_px", cfg.pipeline.rind.dilate_max_px);
            take(s, "erode_min_px", cfg.pipeline.rind.erode_min_px);
            take(s, "erode_max_px", cfg.pipeline.rind.erode_max_px);
        }
        if (j.contains("measure")) {
            const json& s = j["measure"];
            check_keys(*path, "measure", s, {"n_disks"});
            take(s, "n_disks", cfg.n_disks);
        }
        if (j.contains("stats")) {
            const json& s = j["stats"];
            check_keys(*path, "stats", s, {"bootstrap_resamples", "bootstrap_level"});
            take(s, "bootstrap_resamples", cfg.bootstrap_resamples);
            take(s, "bootstrap_level", cfg.bootstrap_level);
        }
        if (j.contains("classify")) {
            for (const auto& [name, rule] : j["classify"].items()) {
                check_keys(*path, "classify." + name, rule, {"cutoff", "abnormal_above"});
                ClassifyRule& r = cfg.classify[name];
                take(rule, "cutoff", r.cutoff);
                take(rule, "abnormal_above", r.abnormal_above);
            }
        }
        if (j.contains("phantom")) {
            const json& s = j["phantom"];
            check_keys(*path, "phantom", s,
                       {"studies", "frames_per_cycle", "speckle", "scale_min", "scale_max",
                        "contract_min", "contract_max"});
            take(s, "studies", cfg.phantom.studies);
            take(s, "frames_per_cycle", cfg.phantom.frames_per_cycle);
            take(s, "speckle", cfg.phantom.speckle);
            take(s, "scale_min", cfg.phantom.scale_min);
            take(s, "scale_max", cfg.phantom.scale_max);
            take(s, "contract_min", cfg.phantom.contract_min);
            take(s, "contract_max", cfg.phantom.contract_max);
        }
    } catch (const json::exception& e) {
        throw DataError(path->string() + ": " + e.what());
    }
    return cfg;
}

void save_config(const RunConfig& cfg, const fs::path& path) {
    json qc = json::object();
    for (const auto& [key, gate] : cfg.pipeline.qc.gates) {
        const auto& [view, chamber] = key;
        qc[view_name(view)][chamber_name(chamber)] = {{"area_min_cm2", gate.area_min_cm2},
                                                      {"area_max_cm2", gate.area_max_cm2},
                                                      {"ecc_min", gate.ecc_min},
                                                      {"ecc_max", gate.ecc_max}};
    }
    json classify = json::object();
    for (const auto& [name, rule] : cfg.classify)
        classify[name] = {{"cutoff", rule.cutoff}, {"abnormal_above", rule.abnormal_above}};

    const json j{
        {"raster", {{"target_spacing_mm", cfg.target_spacing_mm}, {"target_size", cfg.target_size}}},
        {"binarize",
         {{"threshold", cfg.pipeline.binarize.threshold},
          {"min_region_px", cfg.pipeline.binarize.min_region_px},
          {"max_hole_px", cfg.pipeline.binarize.max_hole_px}}},
        {"seeds", {{"min_distance_px", cfg.pipeline.seed_min_distance_px}}},
        {"filters",
         {{"bilateral_sigma_spatial_px", cfg.pipeline.bilateral_sigma_spatial_px},
          {"bilateral_sigma_range", cfg.pipeline.bilateral_sigma_range},
          {"median_kernel", cfg.pipeline.median_kernel},
          {"laplacian_kernel", cfg.pipeline.laplacian_kernel}}},
        {"hough",
         {{"radius_min_px", cfg.pipeline.hough.radius_min_px},
          {"radius_max_px", cfg.pipeline.hough.radius_max_px},
          {"min_center_distance_px", cfg.pipeline.hough.min_center_distance_px},
          {"vote_floor_fraction", cfg.pipeline.hough.vote_floor_fraction},
          {"edge_percentile", cfg.pipeline.hough.edge_percentile}}},
        {"qc", qc},
        {"pipeline",
         {{"ring_dilate_px", cfg.pipeline.ring_dilate_px},
          {"ring_erode_px", cfg.pipeline.ring_erode_px},
          {"rv_height_ratio_gate", cfg.pipeline.rv_height_ratio_gate},
          {"annulus_halfwidth_px", cfg.pipeline.annulus_halfwidth_px},
          {"contour_median_window", cfg.pipeline.contour_median_window},
          {"mirrored", cfg.pipeline.mirrored},
          {"seed", cfg.pipeline.seed},
          {"first_cycle_only", cfg.first_cycle_only}}},
        {"atlas",
         {{"grid_size", cfg.pipeline.atlas.grid_size},
          {"prob_threshold", cfg.pipeline.atlas.prob_threshold},
          {"dice_accept", cfg.pipeline.atlas.dice_accept}}},
        {"rind",
         {{"dilate_min_px", cfg.pipeline.rind.dilate_min_px},
          {"dilate_max_px", cfg.pipeline.rind.dilate_max_px},
          {"erode_min_px", cfg.pipeline.rind.erode_min_px},
          {"erode_max_px", cfg.pipeline.rind.erode_max_px}}},
        {"measure", {{"n_disks", cfg.n_disks}}},
        {"stats",
         {{"bootstrap_resamples", cfg.bootstrap_resamples},
          {"bootstrap_level", cfg.bootstrap_level}}},
        {"classify", classify},
        {"phantom",
         {{"studies", cfg.phantom.studies},
          {"frames_per_cycle", cfg.phantom.frames_per_cycle},
          {"speckle", cfg.phantom.speckle},
          {"scale_min", cfg.phantom.scale_min},
          {"scale_max", cfg.phantom.scale_max},
          {"contract_min", cfg.phantom.contract_min},
          {"contract_max", cfg.phantom.contract_max}}},
    };
    write_json_file(path, j);
}

// ---------------------------------------------------------------------------
// Measurements and reports
// ---------------------------------------------------------------------------

void write_measurements(const std::map<std::string, MeasurementSet>& by_study,
                        const fs::path& path) {
    json studies = json::object();
    for (const auto& [sid, set] : by_study) {
        studies[sid] = {{"values", set.values}, {"warnings", set.warnings}};
    }
    write_json_file(path, json{{"studies", studies}});
}

std::map<std::string, MeasurementSet> read_measurements(const fs::path& path) {
    const json j = parse_json_file(path);
    std::map<std::string, MeasurementSet> out;
    try {
        for (const auto& [sid, sj] : j.at("studies").items()) {
            MeasurementSet set;
            const json values = sj.value("values", json::object());
            for (const auto& [k, v] : values.items()) set.values[k] = v.get<double>();
            const json warnings = sj.value("warnings", json::array());
            for (const auto& w : warnings) set.warnings.push_back(w.get<std::string>());
            out.emplace(sid, std::move(set));
        }
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return out;
}

namespace {

struct Range {
    double lo = 0.0, hi = 1.0;

    static Range of(const std::vector<double>& vals, double extra_lo, double extra_hi) {
        Range r;
        r.lo = extra_lo;
        r.hi = extra_hi;
        for (double v : vals) {
            r.lo = std::min(r.lo, v);
            r.hi = std::max(r.hi, v);
        }
        const double pad = (r.hi - r.lo) > 0 ? 0.05 * (r.hi - r.lo) : 1.0;
        r.lo -= pad;
        r.hi += pad;
        return r;
    }
    double frac(double v) const { return (v - lo) / (hi - lo); }
};

// Maps data space to one SVG panel; y grows upward in data space.
struct Panel {
    double x0, y0, x1, y1;  // pixel corners, y0 = top
    Range xr, yr;

    double px(double x) const { return x0 + xr.frac(x) * (x1 - x0); }
    double py(double y) const { return y1 - yr.frac(y) * (y1 - y0); }
};

void svg_axes(std::string& svg, const Panel& p, const std::string& xlabel,
              const std::string& ylabel) {
    svg += "<path d=\"M " + fmt_g(p.x0) + " " + fmt_g(p.y0) + " L " + fmt_g(p.x0) + " " +
           fmt_g(p.y1) + " L " + fmt_g(p.x1) + " " + fmt_g(p.y1) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt_g((p.x0 + p.x1) / 2) + "\" y=\"" + fmt_g(p.y1 + 28) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + xlabel + "</text>\n";
    svg += "<text x=\"" + fmt_g(p.x0 - 32) + "\" y=\"" + fmt_g((p.y0 + p.y1) / 2) +
           "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 " +
           fmt_g(p.x0 - 32) + " " + fmt_g((p.y0 + p.y1) / 2) + ")\">" + ylabel + "</text>\n";
}

std::string measurement_svg(const std::string& name, const std::vector<double>& measured,
                            const std::vector<double>& reference, double bias, double loa_half) {
    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"780\" height=\"420\" "
        "viewBox=\"0 0 780 420\">\n";
    svg += "<text x=\"390\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + name +
           "</text>\n";

    // Scatter against the identity line.
    std::vector<double> all = measured;
    all.insert(all.end(), reference.begin(), reference.end());
    Range sr = Range::of(all, all.front(), all.front());
    Panel scatter{60, 50, 360, 370, sr, sr};
    svg_axes(svg, scatter, "reference", "measured");
    svg += "<path d=\"M " + fmt_g(scatter.px(sr.lo)) + " " + fmt_g(scatter.py(sr.lo)) + " L " +
           fmt_g(scatter.px(sr.hi)) + " " + fmt_g(scatter.py(sr.hi)) +
           "\" stroke=\"gray\" stroke-dasharray=\"4 3\" fill=\"none\"/>\n";
    for (std::size_t i = 0; i < measured.size(); ++i)
        svg += "<circle cx=\"" + fmt_g(scatter.px(reference[i])) + "\" cy=\"" +
               fmt_g(scatter.py(measured[i])) + "\" r=\"3\" fill=\"steelblue\"/>\n";

    // Bland-Altman: mean against difference, rules at bias and bias +/- LOA.
    std::vector<double> means(measured.size()), diffs(measured.size());
    for (std::size_t i = 0; i < measured.size(); ++i) {
        means[i] = (measured[i] + reference[i]) / 2.0;
        diffs[i] = measured[i] - reference[i];
    }
    Range bx = Range::of(means, means.front(), means.front());
    Range by = Range::of(diffs, bias - loa_half, bias + loa_half);
    Panel ba{450, 50, 750, 370, bx, by};
    svg_axes(svg, ba, "mean of methods", "measured - reference");
    for (double level : {bias - loa_half, bias, bias + loa_half}) {
        const bool mid = level == bias;
        svg += "<line x1=\"" + fmt_g(ba.x0) + "\" x2=\"" + fmt_g(ba.x1) + "\" y1=\"" +
               fmt_g(ba.py(level)) + "\" y2=\"" + fmt_g(ba.py(level)) + "\" stroke=\"" +
               (mid ? "black" : "dimgray") + "\"" +
               (mid ? "" : " stroke-dasharray=\"5 4\"") + "/>\n";
    }
    for (std::size_t i = 0; i < measured.size(); ++i)
        svg += "<circle cx=\"" + fmt_g(ba.px(means[i])) + "\" cy=\"" + fmt_g(ba.py(diffs[i])) +
               "\" r=\"3\" fill=\"indianred\"/>\n";
    svg += "</svg>\n";
    return svg;
}

std::string opt_cell(const std::optional<double>& v) { return v ? fmt_g(*v) : "NA"; }

}  // namespace

void emit_reports(const std::map<std::string, MeasurementSet>& measured,
                  const std::map<std::string, std::map<std::string, double>>& reference,
                  const std::map<std::string, ClassifyRule>& classify,
                  const fs::path& out_dir) {
    // Pair up per-measurement values over the studies both sides know.
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> columns;
    for (const auto& [sid, set] : measured) {
        auto ref_it = reference.find(sid);
        if (ref_it == reference.end()) continue;
        for (const auto& [key, value] : set.values) {
            auto rv = ref_it->second.find(key);
            if (rv == ref_it->second.end()) continue;
            columns[key].first.push_back(value);
            columns[key].second.push_back(rv->second);
        }
    }
    if (columns.empty()) throw DataError("nothing to compare");

    fs::create_directories(out_dir);
    std::string csv = "measurement,n,r,r2,bias,loa,kappa,accuracy\n";
    json report = json::object();
    for (const auto& [key, cols] : columns) {
        const auto& [x, y] = cols;
        const int n = static_cast<int>(x.size());
        std::optional<double> r, r2, bias, loa, kappa, accuracy;
        if (n >= 3) {
            r = spearman(x, y);
            r2 = r_squared(x, y);
        }
        if (n >= 2) {
            BlandAltman ba = bland_altman(x, y);
            bias = ba.bias;
            loa = ba.loa_half;
        }
        auto rule = classify.find(key);
        if (rule != classify.end()) {
            std::vector<std::uint8_t> xa =
                classify_abnormal(x, rule->second.cutoff, rule->second.abnormal_above);
            std::vector<std::uint8_t> ya =
                classify_abnormal(y, rule->second.cutoff, rule->second.abnormal_above);
            BinaryAgreement agree = binary_agreement(xa, ya);
            accuracy = agree.accuracy;
            kappa = agree.kappa;
        }
        csv += key + "," + std::to_string(n) + "," + opt_cell(r) + "," + opt_cell(r2) + "," +
               opt_cell(bias) + "," + opt_cell(loa) + "," + opt_cell(kappa) + "," +
               opt_cell(accuracy) + "\n";
        json row{{"n", n}};
        auto put = [&row](const char* k, const std::optional<double>& v) {
            if (v) row[k] = *v; else row[k] = nullptr;
        };
        put("r", r);
        put("r2", r2);
        put("bias", bias);
        put("loa", loa);
        put("kappa", kappa);
        put("accuracy", accuracy);
        report[key] = std::move(row);

        if (n >= 2) {
            atomic_write_file(out_dir / (key + ".svg"),
                              measurement_svg(key, x, y, *bias, *loa));
        }
    }
    atomic_write_file(out_dir / "compare.csv", csv);
    write_json_file(out_dir / "compare.json", report);
}

Raster FrameStore::load(const FrameRecord& frame) const {
    log_.push_back(frame.frame_key());
    auto [img, extras] = read_frame(manifest_->resolve(frame.image));
    return standardize(img, config_->target_spacing_mm, config_->target_size);
}

}  // namespace echoseg
