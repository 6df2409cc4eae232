#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "echoseg/mask.hpp"
#include "echoseg/raster.hpp"
#include "echoseg/weaklabel.hpp"

namespace echoseg {

struct TrainingPair {
    const Raster* frame = nullptr;
    const LabelMap* label = nullptr;
};

// A model that learns from (frame, label) pairs and proposes labels for
// unseen frames. Implementations must be deterministic.
class Refiner {
public:
    virtual ~Refiner() = default;

    // Throws PipelineError("refiner untrainable") when given no pairs.
    virtual void fit(const std::vector<TrainingPair>& pairs) = 0;

    // nullopt when the frame yields no usable prediction.
    virtual std::optional<LabelMap> predict(const Raster& frame) const = 0;

    // Per-iteration fit-quality values for refiners that train
    // incrementally; empty for closed-form fits. Consumers may feed this
    // to elbow_index to stop early.
    virtual std::vector<double> fit_curve() const { return {}; }
};

// Index of the point of maximum curvature of a monotone-ish curve: both
// axes are normalized to [0,1] and the point farthest from the chord
// between the first and last samples wins (ties to the smaller index).
// Returns nullopt when no point clears min_distance (no elbow). Needs at
// least 3 samples.
std::optional<std::size_t> elbow_index(const std::vector<double>& curve,
                                       double min_distance = 0.05);

struct AtlasParams {
    int grid_size = 160;         // canonical grid edge, pixels
    double prob_threshold = 0.5; // field value that counts as inside
    double dice_accept = 0.5;    // minimum overlap to accept a component
    BinarizeParams binarize;     // blood pool extraction for predict
};

// Mean-shape refiner: every training chamber mask is translated to its
// centroid and scaled to a fixed canonical area, and the per-chamber mean
// occupancy fields are averaged on a canonical grid. Prediction extracts
// blood-pool components from the frame, projects each chamber field to the
// component's centroid and area, and keeps the best match per component
// when its Dice overlap reaches dice_accept. The predicted label is the
// projected shape intersected with the component, holes filled.
//
// When training labels carry a myocardium class, its mean ring field and
// ring-to-lumen area ratio are learned too, and predictions paint the ring
// around each accepted LV component; the ring is never matched against
// blood-pool components directly.
class ShapeAtlas : public Refiner {
public:
    explicit ShapeAtlas(AtlasParams params = AtlasParams{});

    void fit(const std::vector<TrainingPair>& pairs) override;
    std::optional<LabelMap> predict(const Raster& frame) const override;

    bool fitted() const { return !fields_.empty(); }
    const AtlasParams& params() const { return params_; }

    std::string to_json_string() const;
    static ShapeAtlas from_json_string(const std::string& text);

private:
    struct ChamberField {
        std::vector<float> mean;   // grid_size^2 occupancy in [0,1]
        double mean_area_px = 0.0;
        int pair_count = 0;
    };

    double unit_area_px() const;

    AtlasParams params_;
    std::map<Chamber, ChamberField> fields_;
    double myo_per_lumen_area_ = 0.0;
};

}  // namespace echoseg
