// Command-line surface: dataset synthesis, weak labeling, self-learning
// training, segmentation, measurement and reporting. Exit codes: 0 success,
// 1 usage error, 2 data error, 3 pipeline failure.

#include <cstdio>
#include <deque>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "echoseg/io.hpp"
#include "echoseg/measure.hpp"
#include "echoseg/phantom.hpp"
#include "echoseg/pipeline.hpp"
#include "echoseg/stats.hpp"

namespace fs = std::filesystem;
using namespace echoseg;
using nlohmann::json;

namespace {

std::string frame_stem(const FrameRecord& f) {
    return f.video_id + "_" + std::to_string(f.frame_index);
}

// Frames of one split (optionally one view), grouped per video in frame
// order, subset to the first heart cycle when so configured.
std::vector<FrameRecord> select_frames(const StudyManifest& manifest, const std::string& split,
                                       std::optional<View> view, bool first_cycle_only) {
    std::vector<std::string> video_order;
    std::map<std::string, std::vector<FrameRecord>> by_video;
    for (const auto& f : manifest.frames) {
        if (f.split != split) continue;
        if (view && f.view != *view) continue;
        if (!by_video.count(f.video_id)) video_order.push_back(f.video_id);
        by_video[f.video_id].push_back(f);
    }
    std::vector<FrameRecord> out;
    for (const auto& vid : video_order) {
        auto& frames = by_video[vid];
        std::sort(frames.begin(), frames.end(),
                  [](const FrameRecord& a, const FrameRecord& b) {
                      return a.frame_index < b.frame_index;
                  });
        if (!first_cycle_only) {
            out.insert(out.end(), frames.begin(), frames.end());
            continue;
        }
        CycleSelection sel = select_first_cycle(frames);
        if (sel.warned)
            std::cerr << "warning: video " << vid
                      << ": missing fps or heart rate; keeping every frame\n";
        out.insert(out.end(), sel.frames.begin(), sel.frames.end());
    }
    return out;
}

RunConfig load_run_config(const std::string& config_path, std::optional<std::uint64_t> seed) {
    RunConfig cfg = load_config(config_path.empty()
                                    ? std::nullopt
                                    : std::optional<fs::path>(config_path));
    if (seed) cfg.pipeline.seed = *seed;
    return cfg;
}

ShapeAtlas load_model(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ShapeAtlas::from_json_string(ss.str());
}

const std::vector<View>& pipeline_views() {
    // a2c first: the a4c bootstrap consumes the fitted a2c refiner.
    static const std::vector<View> views{View::a2c, View::a4c, View::sax};
    return views;
}

json audit_to_json(const RoundAudit& a) {
    json j{{"step", a.step},
           {"labels_before", a.labels_before},
           {"labels_after", a.labels_after},
           {"replaced", a.replaced},
           {"recruited", a.recruited},
           {"rejected", a.rejected}};
    if (a.elbow) j["elbow"] = *a.elbow;
    return j;
}

// ---------------------------------------------------------------------------
// phantom
// ---------------------------------------------------------------------------

int cmd_phantom(const std::string& config_path, const fs::path& out_dir, std::uint64_t seed) {
    const RunConfig cfg = load_run_config(config_path, std::nullopt);
    const PhantomDatasetConfig& pc = cfg.phantom;
    static const char* splits[5] = {"train", "train", "train", "val", "test"};

    StudyManifest manifest;
    manifest.root = out_dir;
    int frames_written = 0;
    for (int i = 0; i < pc.studies; ++i) {
        Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(i)));
        StudyPhantomParams params;
        params.scale = pc.scale_min + (pc.scale_max - pc.scale_min) * rng.uniform();
        params.contract_scale =
            pc.contract_min + (pc.contract_max - pc.contract_min) * rng.uniform();
        params.frames_per_cycle = pc.frames_per_cycle;
        params.speckle = pc.speckle;
        const double bsa = 1.5 + 0.6 * rng.uniform();

        char sid[16], pid[16];
        std::snprintf(sid, sizeof sid, "s%03d", i);
        std::snprintf(pid, sizeof pid, "p%03d", i);
        const std::string split = splits[i % 5];

        PatientRecord patient;
        patient.patient_id = pid;
        patient.bsa_m2 = bsa;
        patient.sex = (i % 2 == 0) ? "f" : "m";
        patient.reference = analytic_study_measurements(params).values;
        manifest.patients.emplace(pid, patient);

        for (std::size_t v = 0; v < pipeline_views().size(); ++v) {
            const View view = pipeline_views()[v];
            params.seed = derive_seed(seed, static_cast<std::uint64_t>(i) * 3 + v);
            const PhantomOutput phantom = generate(make_view_spec(view, params));
            const std::string video = std::string(sid) + "_" + view_name(view);
            // One full cycle per video: fps frames at 60 bpm span exactly
            // one second, so first-cycle subsetting keeps them all.
            FrameExtras extras;
            extras.view = view_name(view);
            extras.fps = static_cast<double>(params.frames_per_cycle);
            extras.hr_bpm = 60.0;
            for (int t = 0; t < static_cast<int>(phantom.frames.size()); ++t) {
                const std::string stem = video + "_" + std::to_string(t);
                const fs::path image_rel = fs::path("images") / (stem + ".pgm");
                const fs::path truth_rel = fs::path("truth") / (stem + ".pgm");
                write_frame(out_dir / image_rel, phantom.frames[t], extras);
                write_labelmap(out_dir / truth_rel, phantom.truth[t]);
                FrameRecord rec;
                rec.patient_id = pid;
                rec.study_id = sid;
                rec.video_id = video;
                rec.frame_index = t;
                rec.view = view;
                rec.fps = extras.fps;
                rec.hr_bpm = extras.hr_bpm;
                rec.split = split;
                rec.image = image_rel;
                rec.truth = truth_rel;
                manifest.frames.push_back(std::move(rec));
                ++frames_written;
            }
        }
    }
    save_manifest(manifest, out_dir / "manifest.json");
    std::cout << "phantom: " << pc.studies << " studies, " << frames_written << " frames -> "
              << out_dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// weaklabel
// ---------------------------------------------------------------------------

int cmd_weaklabel(const std::string& manifest_path, const std::string& config_path,
                  const fs::path& out_dir, const std::string& view_str,
                  const std::string& split, const std::string& model_path,
                  std::optional<std::uint64_t> seed) {
    const auto view = view_from_name(view_str);
    if (!view) throw std::invalid_argument("unknown view \"" + view_str + "\"");
    std::optional<ShapeAtlas> a2c_model;
    if (!model_path.empty()) a2c_model = load_model(model_path);
    if (*view == View::a4c && !a2c_model)
        throw std::invalid_argument("a4c weak labels need --model (a fitted a2c refiner)");

    const RunConfig cfg = load_run_config(config_path, seed);
    const StudyManifest manifest = load_manifest(manifest_path);
    const FrameStore store(manifest, cfg);
    const auto frames = select_frames(manifest, split, *view, cfg.first_cycle_only);

    int made = 0;
    for (const auto& f : frames) {
        const Raster img = store.load(f);
        const auto label =
            initial_label(*view, img, cfg.pipeline, a2c_model ? &*a2c_model : nullptr);
        if (!label) continue;
        write_labelmap(out_dir / (frame_stem(f) + ".pgm"), *label);
        ++made;
    }
    std::cout << "weaklabel " << view_str << ": " << made << " of " << frames.size()
              << " frames labeled -> " << out_dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const std::string& manifest_path, const std::string& config_path,
              const fs::path& out_dir, std::optional<std::uint64_t> seed) {
    const RunConfig cfg = load_run_config(config_path, seed);
    const StudyManifest manifest = load_manifest(manifest_path);
    const FrameStore store(manifest, cfg);

    json report = json::object();
    std::shared_ptr<ShapeAtlas> a2c_model;
    for (const View view : pipeline_views()) {
        // Training sees the train and val splits only.
        std::vector<FrameRecord> records;
        for (const char* split : {"train", "val"}) {
            auto part = select_frames(manifest, split, view, cfg.first_cycle_only);
            records.insert(records.end(), part.begin(), part.end());
        }
        if (records.empty()) {
            std::cerr << "warning: no " << view_name(view) << " frames to train on\n";
            continue;
        }
        std::vector<PipelineFrame> frames;
        frames.reserve(records.size());
        for (const auto& r : records) frames.push_back({frame_stem(r), store.load(r)});

        const ViewResult res = run_view_pipeline(view, frames, cfg.pipeline,
                                                 view == View::a4c ? a2c_model.get() : nullptr);
        if (view == View::a2c) a2c_model = res.refiner;

        for (const auto& [id, label] : res.labels)
            write_labelmap(out_dir / "labels" / view_name(view) / (id + ".pgm"), label);
        for (const auto& [step, labels] : res.steps)
            for (const auto& [id, label] : labels)
                write_labelmap(out_dir / "steps" / view_name(view) / step / (id + ".pgm"), label);
        if (res.refiner && res.refiner->fitted())
            atomic_write_file(out_dir / "models" / (std::string(view_name(view)) + ".json"),
                              res.refiner->to_json_string());

        json audits = json::array();
        for (const auto& a : res.audits) audits.push_back(audit_to_json(a));
        report[view_name(view)] = {{"frames", frames.size()},
                                   {"labeled", res.labels.size()},
                                   {"audits", audits},
                                   {"warnings", res.warnings}};
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
        std::cout << "train " << view_name(view) << ": " << res.labels.size() << " of "
                  << frames.size() << " frames labeled\n";
    }

    // Split hygiene: abort loudly if anything from the test split was read.
    std::set<std::string> test_keys;
    for (const auto& f : manifest.frames)
        if (f.split == "test") test_keys.insert(f.frame_key());
    for (const auto& key : store.access_log())
        if (test_keys.count(key))
            throw PipelineError("train read a test-split frame: " + key);

    atomic_write_file(out_dir / "train_report.json", report.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// segment
// ---------------------------------------------------------------------------

int cmd_segment(const std::string& manifest_path, const std::string& config_path,
                const fs::path& models_dir, const fs::path& out_dir, const std::string& split,
                std::optional<std::uint64_t> seed) {
    const RunConfig cfg = load_run_config(config_path, seed);
    const StudyManifest manifest = load_manifest(manifest_path);
    const FrameStore store(manifest, cfg);
    const auto frames = select_frames(manifest, split, std::nullopt, cfg.first_cycle_only);

    std::map<View, ShapeAtlas> models;
    int made = 0;
    for (const auto& f : frames) {
        auto it = models.find(f.view);
        if (it == models.end()) {
            const fs::path path = models_dir / (std::string(view_name(f.view)) + ".json");
            if (!fs::exists(path))
                throw DataError("no model for view " + std::string(view_name(f.view)) + " in " +
                                models_dir.string());
            it = models.emplace(f.view, load_model(path)).first;
        }
        const Raster img = store.load(f);
        const auto pred = it->second.predict(img);
        if (!pred) continue;
        write_labelmap(out_dir / (frame_stem(f) + ".pgm"), *pred);
        ++made;
    }
    std::cout << "segment " << split << ": " << made << " of " << frames.size()
              << " frames -> " << out_dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// measure
// ---------------------------------------------------------------------------

int cmd_measure(const std::string& manifest_path, const std::string& config_path,
                const fs::path& labels_dir, const fs::path& out_dir, const std::string& split) {
    const RunConfig cfg = load_run_config(config_path, std::nullopt);
    const StudyManifest manifest = load_manifest(manifest_path);
    const auto frames = select_frames(manifest, split, std::nullopt, cfg.first_cycle_only);

    std::map<std::string, std::vector<FrameRecord>> by_study;
    for (const auto& f : frames) by_study[f.study_id].push_back(f);

    std::map<std::string, MeasurementSet> results;
    for (const auto& [sid, records] : by_study) {
        std::deque<LabelMap> storage;
        std::vector<MeasuredFrame> measured;
        std::optional<double> bsa;
        for (const auto& r : records) {
            const fs::path path = labels_dir / (frame_stem(r) + ".pgm");
            if (!fs::exists(path)) continue;
            storage.push_back(read_labelmap(path));
            measured.push_back({r.video_id, r.frame_index, r.view, &storage.back()});
            auto pit = manifest.patients.find(r.patient_id);
            if (pit != manifest.patients.end()) bsa = pit->second.bsa_m2;
        }
        if (measured.empty()) {
            std::cerr << "warning: study " << sid << " has no label maps; skipped\n";
            continue;
        }
        results.emplace(sid, measure_study(measured, bsa, cfg.n_disks));
    }
    write_measurements(results, out_dir / "measurements.json");
    std::cout << "measure " << split << ": " << results.size() << " studies -> "
              << (out_dir / "measurements.json").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

int cmd_compare(const std::string& manifest_path, const std::string& config_path,
                const fs::path& measurements_path, const fs::path& out_dir) {
    const RunConfig cfg = load_run_config(config_path, std::nullopt);
    const StudyManifest manifest = load_manifest(manifest_path);
    const auto measured = read_measurements(measurements_path);

    std::map<std::string, std::string> study_patient;
    for (const auto& f : manifest.frames) study_patient.emplace(f.study_id, f.patient_id);
    std::map<std::string, std::map<std::string, double>> reference;
    for (const auto& [sid, pid] : study_patient) {
        auto pit = manifest.patients.find(pid);
        if (pit != manifest.patients.end() && !pit->second.reference.empty())
            reference[sid] = pit->second.reference;
    }
    emit_reports(measured, reference, cfg.classify, out_dir);
    std::cout << "compare: reports -> " << out_dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// dice
// ---------------------------------------------------------------------------

int cmd_dice(const std::string& config_path, const fs::path& pred_dir, const fs::path& truth_dir,
             const fs::path& out_path, std::uint64_t seed) {
    const RunConfig cfg = load_run_config(config_path, std::nullopt);

    std::vector<std::string> stems;
    if (!fs::is_directory(pred_dir)) throw DataError("not a directory: " + pred_dir.string());
    for (const auto& entry : fs::directory_iterator(pred_dir))
        if (entry.path().extension() == ".pgm") stems.push_back(entry.path().stem().string());
    std::sort(stems.begin(), stems.end());
    if (stems.empty()) throw DataError("nothing to compare");

    static const Chamber classes[] = {Chamber::LV, Chamber::LA, Chamber::RV, Chamber::RA,
                                      Chamber::LVMyo};
    std::map<Chamber, std::vector<double>> scores;
    for (const auto& stem : stems) {
        const fs::path truth_path = truth_dir / (stem + ".pgm");
        if (!fs::exists(truth_path))
            throw DataError("no truth label for " + stem + " in " + truth_dir.string());
        const LabelMap pred = read_labelmap(pred_dir / (stem + ".pgm"));
        const LabelMap truth = read_labelmap(truth_path);
        for (Chamber c : classes) {
            const BinaryMask pm = pred.mask_of(c);
            const BinaryMask tm = truth.mask_of(c);
            // A class absent from both sides is not part of this frame's task.
            if (pm.empty() && tm.empty()) continue;
            scores[c].push_back(dice(pm, tm));
        }
    }

    json by_class = json::object();
    for (const auto& [chamber, values] : scores) {
        json row{{"n", values.size()}, {"mean_dice", mean_of(values)}};
        if (values.size() >= 2) {
            const auto [lo, hi] =
                bootstrap_ci(values, cfg.bootstrap_resamples, cfg.bootstrap_level, seed);
            row["ci_low"] = lo;
            row["ci_high"] = hi;
            std::printf("%-8s n=%-4zu dice=%.4f  [%.4f, %.4f]\n", chamber_name(chamber),
                        values.size(), mean_of(values), lo, hi);
        } else {
            // A single frame gives nothing to resample over.
            row["ci_low"] = nullptr;
            row["ci_high"] = nullptr;
            std::printf("%-8s n=%-4zu dice=%.4f  [no interval]\n", chamber_name(chamber),
                        values.size(), mean_of(values));
        }
        by_class[chamber_name(chamber)] = std::move(row);
    }
    const json out{{"frames", stems.size()},
                   {"resamples", cfg.bootstrap_resamples},
                   {"level", cfg.bootstrap_level},
                   {"seed", seed},
                   {"classes", by_class}};
    atomic_write_file(out_path, out.dump(2) + "\n");
    std::cout << "dice: " << stems.size() << " frames -> " << out_path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised cardiac ultrasound segmentation"};
    app.require_subcommand(1);

    std::string manifest_path, config_path, out_path, split, view_str, model_path;
    std::string models_dir, labels_dir, measurements_path, pred_dir, truth_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;

    auto add_common = [&](CLI::App* sub, bool with_seed = true) {
        sub->add_option("--config", config_path, "run configuration JSON");
        sub->add_option("--out", out_path, "output directory or file")->required();
        if (with_seed)
            sub->add_option("--seed", seed, "random seed")->each([&](const std::string&) {
                seed_given = true;
            });
    };

    CLI::App* phantom = app.add_subcommand("phantom", "emit a synthetic dataset");
    add_common(phantom);

    CLI::App* weaklabel = app.add_subcommand("weaklabel", "initial weak labels for one view");
    weaklabel->add_option("--manifest", manifest_path, "dataset manifest")->required();
    weaklabel->add_option("--view", view_str, "a2c, a4c or sax")->required();
    weaklabel->add_option("--model", model_path, "fitted a2c refiner (required for a4c)");
    weaklabel->add_option("--split", split, "dataset split")->default_val("train");
    add_common(weaklabel);

    CLI::App* train = app.add_subcommand("train", "run the self-learning rounds");
    train->add_option("--manifest", manifest_path, "dataset manifest")->required();
    add_common(train);

    CLI::App* segment = app.add_subcommand("segment", "apply trained refiners to a split");
    segment->add_option("--manifest", manifest_path, "dataset manifest")->required();
    segment->add_option("--models", models_dir, "directory with <view>.json refiners")->required();
    segment->add_option("--split", split, "dataset split")->default_val("test");
    add_common(segment);

    CLI::App* measure = app.add_subcommand("measure", "chamber measurements from label maps");
    measure->add_option("--manifest", manifest_path, "dataset manifest")->required();
    measure->add_option("--labels", labels_dir, "directory with label maps")->required();
    measure->add_option("--split", split, "dataset split")->default_val("test");
    add_common(measure, false);

    CLI::App* compare = app.add_subcommand("compare", "agreement stats and plots");
    compare->add_option("--manifest", manifest_path, "manifest with reference values")->required();
    compare->add_option("--measurements", measurements_path, "measurements JSON")->required();
    add_common(compare, false);

    CLI::App* dice_cmd = app.add_subcommand("dice", "mask-vs-mask Dice with bootstrap CI");
    dice_cmd->add_option("--pred", pred_dir, "predicted label maps")->required();
    dice_cmd->add_option("--truth", truth_dir, "reference label maps")->required();
    add_common(dice_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    const std::optional<std::uint64_t> seed_opt =
        seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt;
    try {
        if (phantom->parsed()) return cmd_phantom(config_path, out_path, seed);
        if (weaklabel->parsed())
            return cmd_weaklabel(manifest_path, config_path, out_path, view_str, split,
                                 model_path, seed_opt);
        if (train->parsed()) return cmd_train(manifest_path, config_path, out_path, seed_opt);
        if (segment->parsed())
            return cmd_segment(manifest_path, config_path, models_dir, out_path, split, seed_opt);
        if (measure->parsed())
            return cmd_measure(manifest_path, config_path, labels_dir, out_path, split);
        if (compare->parsed())
            return cmd_compare(manifest_path, config_path, measurements_path, out_path);
        if (dice_cmd->parsed()) return cmd_dice(config_path, pred_dir, truth_dir, out_path, seed);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const PipelineError& e) {
        std::cerr << "pipeline error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
