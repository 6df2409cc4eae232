#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "echoseg/mask.hpp"
#include "echoseg/measure.hpp"
#include "echoseg/pipeline.hpp"
#include "echoseg/raster.hpp"
#include "echoseg/shapeqc.hpp"

namespace echoseg {

// ---------------------------------------------------------------------------
// Frames on disk: binary P5 pgm (maxval 255, byte 0 = 0.0, byte 255 = 1.0)
// plus a JSON sidecar of the same basename carrying physical metadata.
// ---------------------------------------------------------------------------

struct FrameExtras {
    std::optional<std::string> view;
    std::optional<double> fps;
    std::optional<double> hr_bpm;
};

// Writes image.pgm and image.json atomically (temp file + rename).
void write_frame(const std::filesystem::path& pgm_path, const Raster& img,
                 const FrameExtras& extras = {});

// Reads a frame and its sidecar. Throws DataError naming the offending
// byte offset on malformed pgm data, and on missing or invalid sidecars.
std::pair<Raster, FrameExtras> read_frame(const std::filesystem::path& pgm_path);

// Label maps use the same container with a fixed code per class:
// 0 background, 50 LV, 100 LA, 150 RV, 200 RA, 250 LV myocardium.
void write_labelmap(const std::filesystem::path& pgm_path, const LabelMap& label);
LabelMap read_labelmap(const std::filesystem::path& pgm_path);

// ---------------------------------------------------------------------------
// Study manifest
// ---------------------------------------------------------------------------

struct PatientRecord {
    std::string patient_id;
    std::optional<double> bsa_m2;
    std::optional<std::string> sex;
    std::map<std::string, double> reference;  // measurement name -> value
};

struct FrameRecord {
    std::string patient_id;
    std::string study_id;
    std::string video_id;
    int frame_index = 0;
    View view = View::a2c;
    std::optional<double> fps;
    std::optional<double> hr_bpm;
    std::string split;  // train | val | test
    std::filesystem::path image;
    std::optional<std::filesystem::path> truth;

    std::string frame_key() const { return video_id + "#" + std::to_string(frame_index); }
};

struct StudyManifest {
    std::filesystem::path root;  // directory the relative paths resolve against
    std::map<std::string, PatientRecord> patients;
    std::vector<FrameRecord> frames;

    std::filesystem::path resolve(const std::filesystem::path& p) const {
        return p.is_absolute() ? p : root / p;
    }
};

// Loads and validates: frame keys (video, index) must be unique and no
// patient may appear in more than one split. Violations abort the load.
StudyManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const StudyManifest& manifest, const std::filesystem::path& path);

// First-cycle subset of one video's frames: keeps frame indices
// 0 .. ceil(fps * 60 / hr) - 1. Without both rates the whole video is kept
// and `warned` is set.
struct CycleSelection {
    std::vector<FrameRecord> frames;
    bool warned = false;
};
CycleSelection select_first_cycle(const std::vector<FrameRecord>& video_frames);

// ---------------------------------------------------------------------------
// Run configuration: one JSON file, sectioned per module, every field
// optional and defaulted. Unknown keys are rejected so typos surface.
// ---------------------------------------------------------------------------

struct ClassifyRule {
    double cutoff = 0.0;
    bool abnormal_above = false;
};

struct PhantomDatasetConfig {
    int studies = 8;
    int frames_per_cycle = 8;
    double speckle = 0.35;
    double scale_min = 0.96;
    double scale_max = 1.08;
    double contract_min = 0.92;
    double contract_max = 1.08;
};

struct RunConfig {
    double target_spacing_mm = 0.5;
    int target_size = 256;
    PipelineConfig pipeline;
    int n_disks = 20;
    int bootstrap_resamples = 1000;
    double bootstrap_level = 0.95;
    std::map<std::string, ClassifyRule> classify = {{"lvef_pct", {50.0, false}}};
    bool first_cycle_only = true;
    PhantomDatasetConfig phantom;
};

RunConfig load_config(const std::optional<std::filesystem::path>& path);
void save_config(const RunConfig& config, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Measurements and comparison reports
// ---------------------------------------------------------------------------

void write_measurements(const std::map<std::string, MeasurementSet>& by_study,
                        const std::filesystem::path& path);
std::map<std::string, MeasurementSet> read_measurements(const std::filesystem::path& path);

// Emits compare.csv (columns measurement,n,r,r2,bias,loa,kappa,accuracy),
// compare.json with the same rows, and one SVG per measurement holding a
// scatter panel and a Bland-Altman panel whose bias and limits of agreement
// are drawn as exactly three horizontal rule lines. Throws
// DataError("nothing to compare") when no study has both a measured and a
// reference value for any measurement.
void emit_reports(const std::map<std::string, MeasurementSet>& measured,
                  const std::map<std::string, std::map<std::string, double>>& reference,
                  const std::map<std::string, ClassifyRule>& classify,
                  const std::filesystem::path& out_dir);

// Atomic text/bytes writer used by everything above: writes to a sibling
// temp file and renames over the target.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

// ---------------------------------------------------------------------------
// Frame loading with an access trail, so training/test isolation can be
// audited after a run.
// ---------------------------------------------------------------------------

class FrameStore {
public:
    FrameStore(const StudyManifest& manifest, const RunConfig& config)
        : manifest_(&manifest), config_(&config) {}

    // Reads, standardizes and logs the access under the frame's key.
    Raster load(const FrameRecord& frame) const;

    const std::vector<std::string>& access_log() const { return log_; }

private:
    const StudyManifest* manifest_;
    const RunConfig* config_;
    mutable std::vector<std::string> log_;
};

}  // namespace echoseg
