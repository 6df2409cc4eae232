#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "echoseg/raster.hpp"
#include "echoseg/refiner.hpp"
#include "echoseg/shapeqc.hpp"
#include "echoseg/weaklabel.hpp"

namespace echoseg {

// Everything the per-view label bootstrapping needs; all knobs overridable
// from the run configuration.
struct PipelineConfig {
    BinarizeParams binarize;
    int seed_min_distance_px = 20;
    double bilateral_sigma_spatial_px = 15.0;
    double bilateral_sigma_range = 0.25;
    int median_kernel = 9;
    int laplacian_kernel = 5;
    HoughParams hough;
    QcConfig qc = QcConfig::defaults();
    AtlasParams atlas;
    int ring_dilate_px = 2;            // long-axis edge-ring refinement
    int ring_erode_px = 2;
    double rv_height_ratio_gate = 0.8;
    int annulus_halfwidth_px = 8;      // short-axis edge search band
    int contour_median_window = 9;     // circular smoothing of the radius profile
    RindRanges rind;
    bool mirrored = false;
    std::uint64_t seed = 0;
};

// A standardized frame entering a view pipeline. Ids key every label map
// the pipeline produces.
struct PipelineFrame {
    std::string frame_id;
    Raster image;
};

// What one self-learning round did: label counts before and after, how many
// frames the refit model relabeled or newly covered, and the elbow of the
// refiner's fit curve when it exposes one.
struct RoundAudit {
    std::string step;
    int labels_before = 0;
    int labels_after = 0;
    int replaced = 0;
    int recruited = 0;
    int rejected = 0;
    std::optional<std::size_t> elbow;
};

using LabelSet = std::map<std::string, LabelMap>;

struct ViewResult {
    LabelSet labels;                                        // after the final round
    std::vector<std::pair<std::string, LabelSet>> steps;    // snapshot after each step
    std::shared_ptr<ShapeAtlas> refiner;                    // last fitted model
    std::vector<RoundAudit> audits;
    std::vector<std::string> warnings;
};

// True when the label map carries every chamber the view requires and each
// required chamber passes its QC gate. Extra ungated classes are fine.
bool prediction_passes_qc(const LabelMap& label, View view, const QcConfig& qc);

// Initial weak label for one frame, or nullopt when the frame is unusable:
// A2C runs bilateral -> binarize -> distance seeds -> watershed -> chamber
// assignment -> QC; A4C routes blood-pool components through the A2C
// refiner; SAX takes the strongest Hough circle as the lumen disk.
std::optional<LabelMap> initial_label(View view, const Raster& frame, const PipelineConfig& cfg,
                                      const ShapeAtlas* a2c_model = nullptr);

// One self-learning round: refit the refiner on the current labels, then
// accept each frame's fresh prediction when it passes QC. Labels only ever
// improve in coverage; a prediction that fails QC leaves the old label in
// place. An untrainable refiner aborts the round with a warning.
RoundAudit self_learning_round(const std::string& step, Refiner& refiner,
                               const std::vector<PipelineFrame>& frames, LabelSet& labels,
                               View view, const PipelineConfig& cfg,
                               std::vector<std::string>& warnings);

// Runs the whole per-view step graph over the given frames. A4C requires a
// fitted A2C refiner. Throws PipelineError("no usable weak labels") when
// the initial step labels nothing.
ViewResult run_view_pipeline(View view, const std::vector<PipelineFrame>& frames,
                             const PipelineConfig& cfg, const ShapeAtlas* a2c_model = nullptr);

}  // namespace echoseg
