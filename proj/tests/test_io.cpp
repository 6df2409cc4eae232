// Disk formats and run configuration: pgm frames with JSON sidecars, label
// maps, the study manifest with its split rules, the sectioned config file,
// measurement files and the comparison reports.

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "echoseg/common.hpp"
#include "echoseg/io.hpp"
#include "oracles.hpp"

using namespace echoseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("echoseg_io_test_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

template <typename Fn>
void expect_data_error(Fn&& fn, const std::string& fragment) {
    try {
        fn();
        FAIL_CHECK("expected DataError containing \"" << fragment << "\", nothing thrown");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t at = text.find(needle); at != std::string::npos;
         at = text.find(needle, at + needle.size()))
        ++n;
    return n;
}

FrameRecord frame_record(const std::string& video, int index, View view,
                         const std::string& split, const fs::path& image) {
    FrameRecord f;
    f.patient_id = "p_" + video;
    f.study_id = "s_" + video;
    f.video_id = video;
    f.frame_index = index;
    f.view = view;
    f.split = split;
    f.image = image;
    return f;
}

}  // namespace

TEST_CASE("frames survive the disk round trip up to 8-bit quantization") {
    TempDir dir;
    const SectorGeometry sector{2.0, 12.0, 80.0, 20.0};
    Raster img = Raster::zeros(24, 32, 0.7, sector);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = static_cast<float>(i) / static_cast<float>(img.pixels.size() - 1);
    img.pixels[0] = -0.2f;  // clamps to 0
    img.pixels[1] = 1.7f;   // clamps to 1

    FrameExtras extras;
    extras.view = "a2c";
    extras.fps = 31.5;
    extras.hr_bpm = 72.0;
    const fs::path path = dir.path / "frame.pgm";
    write_frame(path, img, extras);

    const auto [back, ex] = read_frame(path);
    CHECK(back.width == 24);
    CHECK(back.height == 32);
    CHECK(back.spacing_mm == 0.7);
    CHECK(back.sector.apex_row == 2.0);
    CHECK(back.sector.apex_col == 12.0);
    CHECK(back.sector.opening_angle_deg == 80.0);
    CHECK(back.sector.depth_px == 20.0);
    REQUIRE(ex.view.has_value());
    CHECK(*ex.view == "a2c");
    CHECK(*ex.fps == 31.5);
    CHECK(*ex.hr_bpm == 72.0);

    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const double v = std::clamp(static_cast<double>(img.pixels[i]), 0.0, 1.0);
        const auto byte = static_cast<std::uint8_t>(std::lround(v * 255.0));
        CHECK(back.pixels[i] == static_cast<float>(byte / 255.0));
    }
    CHECK(back.pixels[0] == 0.0f);
    CHECK(back.pixels[1] == 1.0f);

    // A frame written without extras reads back without them.
    const fs::path bare = dir.path / "bare.pgm";
    write_frame(bare, img);
    const auto [img2, ex2] = read_frame(bare);
    CHECK_FALSE(ex2.view.has_value());
    CHECK_FALSE(ex2.fps.has_value());
    CHECK(img2.pixels == back.pixels);
}

TEST_CASE("malformed frame files are rejected with the byte position") {
    TempDir dir;
    const std::string sidecar = "{\"spacing_mm\": 0.5}";

    const fs::path magic = dir.path / "magic.pgm";
    atomic_write_file(magic, "P6\n2 2\n255\n0000");
    atomic_write_file(dir.path / "magic.json", sidecar);
    expect_data_error([&] { read_frame(magic); }, "not a P5 pgm (bad magic at byte 0)");

    const fs::path trunc = dir.path / "trunc.pgm";
    atomic_write_file(trunc, std::string("P5\n10 10\n255\n") + "abcde");
    atomic_write_file(dir.path / "trunc.json", sidecar);
    expect_data_error([&] { read_frame(trunc); }, "truncated pixel data");

    const fs::path maxval = dir.path / "maxval.pgm";
    atomic_write_file(maxval, std::string("P5\n2 2\n65535\n") + std::string(8, 'x'));
    atomic_write_file(dir.path / "maxval.json", sidecar);
    expect_data_error([&] { read_frame(maxval); }, "unsupported maxval 65535");

    const fs::path orphan = dir.path / "orphan.pgm";
    atomic_write_file(orphan, std::string("P5\n2 2\n255\n") + std::string(4, 'x'));
    expect_data_error([&] { read_frame(orphan); }, "missing sidecar");

    expect_data_error([&] { read_frame(dir.path / "absent.pgm"); }, "cannot open");
}

TEST_CASE("label maps use one fixed byte code per class") {
    TempDir dir;
    LabelMap label = LabelMap::zeros(3, 2, 0.5);
    label.set(0, 0, Chamber::LV);
    label.set(0, 1, Chamber::LA);
    label.set(0, 2, Chamber::RV);
    label.set(1, 0, Chamber::RA);
    label.set(1, 1, Chamber::LVMyo);

    const fs::path path = dir.path / "label.pgm";
    write_labelmap(path, label);

    const std::string bytes = slurp(path);
    const std::string body = bytes.substr(bytes.size() - 6);
    CHECK(body == std::string({'\x32', '\x64', '\x96', '\xc8', '\xfa', '\x00'}));

    const LabelMap back = read_labelmap(path);
    CHECK(back.classes == label.classes);
    CHECK(back.spacing_mm == 0.5);

    // Any byte off the 50-step ladder is rejected.
    const fs::path bogus = dir.path / "bogus.pgm";
    atomic_write_file(bogus, std::string("P5\n2 1\n255\n") + '\x32' + '\x25');
    atomic_write_file(dir.path / "bogus.json", "{\"spacing_mm\": 0.5}");
    expect_data_error([&] { read_labelmap(bogus); }, "unknown class code 37");
}

TEST_CASE("manifest load validates keys, views, splits and patient isolation") {
    TempDir dir;
    const fs::path path = dir.path / "manifest.json";

    auto write_manifest = [&](const std::string& frames_json) {
        atomic_write_file(path,
                          "{\"patients\": [{\"patient_id\": \"p1\", \"bsa_m2\": 1.8, "
                          "\"reference\": {\"lvef_pct\": 61.5}}],\n\"frames\": [" +
                              frames_json + "]}");
    };
    auto frame_json = [](const std::string& video, int index, const std::string& view,
                         const std::string& split) {
        return "{\"patient_id\": \"p1\", \"study_id\": \"s1\", \"video_id\": \"" + video +
               "\", \"frame_index\": " + std::to_string(index) + ", \"view\": \"" + view +
               "\", \"split\": \"" + split + "\", \"image\": \"images/" + video + ".pgm\"}";
    };

    write_manifest(frame_json("v1", 0, "a2c", "train") + "," + frame_json("v1", 1, "a2c", "train"));
    const StudyManifest m = load_manifest(path);
    CHECK(m.root == dir.path);
    REQUIRE(m.patients.count("p1") == 1);
    CHECK(*m.patients.at("p1").bsa_m2 == 1.8);
    CHECK(m.patients.at("p1").reference.at("lvef_pct") == 61.5);
    REQUIRE(m.frames.size() == 2);
    CHECK(m.frames[0].view == View::a2c);
    CHECK(m.frames[0].frame_key() == "v1#0");
    CHECK(m.resolve(m.frames[0].image) == dir.path / "images/v1.pgm");

    write_manifest(frame_json("v1", 0, "a2c", "train") + "," + frame_json("v1", 0, "a2c", "train"));
    expect_data_error([&] { load_manifest(path); }, "duplicate frame v1#0");

    write_manifest(frame_json("v1", 0, "a2c", "train") + "," + frame_json("v2", 0, "a2c", "test"));
    expect_data_error([&] { load_manifest(path); }, "appears in splits train and test");

    write_manifest(frame_json("v1", 0, "apical", "train"));
    expect_data_error([&] { load_manifest(path); }, "unknown view \"apical\"");

    write_manifest(frame_json("v1", 0, "a2c", "holdout"));
    expect_data_error([&] { load_manifest(path); }, "unknown split \"holdout\"");

    write_manifest(frame_json("v1", -3, "a2c", "train"));
    expect_data_error([&] { load_manifest(path); }, "negative frame_index in v1");

    atomic_write_file(path, "this is not json");
    expect_data_error([&] { load_manifest(path); }, path.string());
}

TEST_CASE("manifest write and reload preserve every record") {
    TempDir dir;
    StudyManifest m;
    m.root = dir.path;
    PatientRecord p;
    p.patient_id = "p9";
    p.bsa_m2 = 2.1;
    p.sex = "f";
    p.reference["lvedv_ml"] = 120.0;
    m.patients.emplace(p.patient_id, p);

    FrameRecord f = frame_record("v9", 4, View::sax, "val", "images/v9_4.pgm");
    f.patient_id = "p9";
    f.fps = 40.0;
    f.hr_bpm = 80.0;
    f.truth = fs::path("truth/v9_4.pgm");
    m.frames.push_back(f);

    const fs::path path = dir.path / "manifest.json";
    save_manifest(m, path);
    const StudyManifest back = load_manifest(path);

    REQUIRE(back.frames.size() == 1);
    const FrameRecord& g = back.frames[0];
    CHECK(g.patient_id == "p9");
    CHECK(g.study_id == "s_v9");
    CHECK(g.video_id == "v9");
    CHECK(g.frame_index == 4);
    CHECK(g.view == View::sax);
    CHECK(*g.fps == 40.0);
    CHECK(*g.hr_bpm == 80.0);
    CHECK(g.split == "val");
    CHECK(g.image == fs::path("images/v9_4.pgm"));
    REQUIRE(g.truth.has_value());
    CHECK(*g.truth == fs::path("truth/v9_4.pgm"));
    CHECK(*back.patients.at("p9").bsa_m2 == 2.1);
    CHECK(*back.patients.at("p9").sex == "f");
    CHECK(back.patients.at("p9").reference.at("lvedv_ml") == 120.0);
}

TEST_CASE("first-cycle selection keeps ceil(fps * 60 / hr) frames") {
    std::vector<FrameRecord> video;
    for (int i = 0; i < 40; ++i) {
        FrameRecord f = frame_record("v1", i, View::a2c, "train", "x.pgm");
        f.fps = 30.0;
        f.hr_bpm = 72.0;
        video.push_back(f);
    }
    const CycleSelection sel = select_first_cycle(video);
    CHECK_FALSE(sel.warned);
    REQUIRE(sel.frames.size() == 25);  // ceil(30 * 60 / 72)
    for (const auto& f : sel.frames) CHECK(f.frame_index < 25);

    std::vector<FrameRecord> unrated = video;
    for (auto& f : unrated) f.hr_bpm.reset();
    const CycleSelection all = select_first_cycle(unrated);
    CHECK(all.warned);
    CHECK(all.frames.size() == video.size());

    CHECK(select_first_cycle({}).frames.empty());
}

TEST_CASE("run configuration defaults, overrides and typo rejection") {
    const RunConfig defaults = load_config(std::nullopt);
    CHECK(defaults.target_size == 256);
    CHECK(defaults.target_spacing_mm == 0.5);
    CHECK(defaults.n_disks == 20);
    CHECK(defaults.pipeline.bilateral_sigma_spatial_px == 15.0);
    CHECK(defaults.pipeline.hough.radius_min_px == 20);
    CHECK(defaults.first_cycle_only);
    REQUIRE(defaults.classify.count("lvef_pct") == 1);
    CHECK(defaults.classify.at("lvef_pct").cutoff == 50.0);
    CHECK_FALSE(defaults.classify.at("lvef_pct").abnormal_above);

    TempDir dir;
    const fs::path path = dir.path / "config.json";
    atomic_write_file(path, R"({
        "raster": {"target_size": 128},
        "binarize": {"threshold": 0.2},
        "pipeline": {"seed": 9, "mirrored": true},
        "qc": {"a2c": {"lv": {"area_min_cm2": 5.5}}},
        "classify": {"lv_mass_g": {"cutoff": 180.0, "abnormal_above": true}}
    })");
    const RunConfig cfg = load_config(path);
    CHECK(cfg.target_size == 128);
    CHECK(cfg.target_spacing_mm == 0.5);
    CHECK(cfg.pipeline.binarize.threshold == 0.2);
    CHECK(cfg.pipeline.atlas.binarize.threshold == 0.2);
    CHECK(cfg.pipeline.seed == 9);
    CHECK(cfg.pipeline.mirrored);
    REQUIRE(cfg.pipeline.qc.find(View::a2c, Chamber::LV) != nullptr);
    CHECK(cfg.pipeline.qc.find(View::a2c, Chamber::LV)->area_min_cm2 == 5.5);
    CHECK(cfg.pipeline.qc.find(View::a2c, Chamber::LV)->area_max_cm2 == 104.0);
    CHECK(cfg.classify.at("lv_mass_g").cutoff == 180.0);
    CHECK(cfg.classify.at("lv_mass_g").abnormal_above);
    CHECK(cfg.classify.count("lvef_pct") == 1);  // defaults stay alongside

    atomic_write_file(path, R"({"bogus": {}})");
    expect_data_error([&] { load_config(path); }, "unknown config section bogus");
    atomic_write_file(path, R"({"raster": {"bogus": 1}})");
    expect_data_error([&] { load_config(path); }, "unknown config key raster.bogus");
    atomic_write_file(path, R"({"qc": {"a2c": {"bogus": {}}}})");
    expect_data_error([&] { load_config(path); }, "unknown config key qc.a2c.bogus");
    atomic_write_file(path, R"([])");
    expect_data_error([&] { load_config(path); }, "config must be a JSON object");

    RunConfig tweaked = defaults;
    tweaked.target_size = 192;
    tweaked.pipeline.hough.radius_max_px = 70;
    tweaked.phantom.studies = 3;
    save_config(tweaked, path);
    const RunConfig reloaded = load_config(path);
    CHECK(reloaded.target_size == 192);
    CHECK(reloaded.pipeline.hough.radius_max_px == 70);
    CHECK(reloaded.phantom.studies == 3);
    CHECK(reloaded.bootstrap_resamples == defaults.bootstrap_resamples);
}

TEST_CASE("measurement files round trip values and warnings") {
    TempDir dir;
    std::map<std::string, MeasurementSet> by_study;
    by_study["s1"].values = {{"lvedv_ml", 101.5}, {"lvef_pct", 58.25}};
    by_study["s1"].warnings = {"no contraction visible for ra in a4c"};
    by_study["s2"].values = {{"lvedv_ml", 88.0}};

    const fs::path path = dir.path / "measurements.json";
    write_measurements(by_study, path);
    const auto back = read_measurements(path);
    REQUIRE(back.size() == 2);
    CHECK(back.at("s1").values.at("lvedv_ml") == 101.5);
    CHECK(back.at("s1").values.at("lvef_pct") == 58.25);
    REQUIRE(back.at("s1").warnings.size() == 1);
    CHECK(back.at("s1").warnings[0] == "no contraction visible for ra in a4c");
    CHECK(back.at("s2").values.at("lvedv_ml") == 88.0);
    CHECK(back.at("s2").warnings.empty());
}

TEST_CASE("comparison reports carry stats, agreement and bland-altman rules") {
    TempDir dir;
    std::map<std::string, MeasurementSet> measured;
    std::map<std::string, std::map<std::string, double>> reference;
    const double efs[5] = {62.0, 48.0, 55.0, 40.0, 66.0};
    for (int i = 0; i < 5; ++i) {
        const std::string sid = "s" + std::to_string(i);
        measured[sid].values["lvef_pct"] = efs[i];
        measured[sid].values["lvedv_ml"] = 100.0 + 3.0 * i;
        if (i < 4) {
            reference[sid]["lvef_pct"] = efs[i] + (i % 2 ? 2.0 : -1.0);
            reference[sid]["lvedv_ml"] = 98.0 + 3.2 * i;
        }
    }
    std::map<std::string, ClassifyRule> classify{{"lvef_pct", {50.0, false}}};

    const fs::path out = dir.path / "report";
    emit_reports(measured, reference, classify, out);

    const std::string csv = slurp(out / "compare.csv");
    CHECK(csv.rfind("measurement,n,r,r2,bias,loa,kappa,accuracy\n", 0) == 0);
    CHECK(csv.find("lvef_pct,4,") != std::string::npos);
    CHECK(csv.find("lvedv_ml,4,") != std::string::npos);

    const nlohmann::json report = nlohmann::json::parse(slurp(out / "compare.json"));
    REQUIRE(report.contains("lvef_pct"));
    CHECK(report["lvef_pct"]["n"] == 4);
    CHECK(report["lvef_pct"]["r"].is_number());
    CHECK(report["lvef_pct"]["bias"].is_number());
    CHECK(report["lvef_pct"]["kappa"].is_number());
    CHECK(report["lvef_pct"]["accuracy"].is_number());
    CHECK(report["lvedv_ml"]["kappa"].is_null());  // no rule for volumes

    // The Bland-Altman panel draws bias and both limits: three rules.
    for (const char* name : {"lvef_pct.svg", "lvedv_ml.svg"}) {
        const std::string svg = slurp(out / name);
        CHECK(count_of(svg, "<line ") == 3);
        CHECK(count_of(svg, "<circle ") == 8);  // 4 scatter + 4 bland-altman
    }

    std::map<std::string, std::map<std::string, double>> unrelated{{"zz", {{"lvef_pct", 50.0}}}};
    CHECK_THROWS_WITH_AS(emit_reports(measured, unrelated, classify, out), "nothing to compare",
                         DataError);
}

TEST_CASE("the frame store standardizes frames and logs every access") {
    TempDir dir;
    const SectorGeometry sector{4.0, 128.0, 90.0, 248.0};
    Raster img = Raster::zeros(256, 256, 0.5, sector);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            if (img.sector.contains(r, c)) img.at(r, c) = 0.5f;
    fs::create_directories(dir.path / "images");
    write_frame(dir.path / "images/v1_0.pgm", img);

    StudyManifest m;
    m.root = dir.path;
    m.frames.push_back(frame_record("v1", 0, View::a2c, "train", "images/v1_0.pgm"));

    const RunConfig cfg = load_config(std::nullopt);
    FrameStore store(m, cfg);
    CHECK(store.access_log().empty());
    const Raster loaded = store.load(m.frames[0]);
    CHECK(loaded.width == cfg.target_size);
    CHECK(loaded.height == cfg.target_size);
    CHECK(loaded.spacing_mm == cfg.target_spacing_mm);
    REQUIRE(store.access_log().size() == 1);
    CHECK(store.access_log()[0] == "v1#0");
    store.load(m.frames[0]);
    CHECK(store.access_log().size() == 2);
}
