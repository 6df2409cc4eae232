#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "echoseg/mask.hpp"
#include "echoseg/weaklabel.hpp"

namespace echoseg {

enum class View { a2c, a4c, sax };

const char* view_name(View v);
std::optional<View> view_from_name(const std::string& name);

// Shape summary of one connected region.
struct Segment {
    Chamber chamber = Chamber::background;  // set by assign_chambers
    std::vector<std::int32_t> pixels;       // row-major linear indices, ascending
    int width = 0, height = 0;
    double spacing_mm = 0.0;
    double area_cm2 = 0.0;
    double eccentricity = 0.0;  // sqrt(1 - minor/major second moment), 0 for a single pixel
    double centroid_row = 0.0, centroid_col = 0.0;
    int min_row = 0, max_row = 0, min_col = 0, max_col = 0;

    BinaryMask to_mask() const;
};

// Computes area (pixel count times physical pixel area), centroid,
// bounding box and moment-based eccentricity for a component.
Segment describe(const Component& comp, int width, int height, double spacing_mm);

// Inclusive plausibility bounds for one chamber in one view.
struct ChamberGate {
    double area_min_cm2 = 0.0;
    double area_max_cm2 = 0.0;
    double ecc_min = 0.0;
    double ecc_max = 0.0;
};

struct QcConfig {
    std::map<std::pair<View, Chamber>, ChamberGate> gates;

    const ChamberGate* find(View v, Chamber c) const;
    static QcConfig defaults();
};

struct QcRejection {
    Segment segment;
    std::string reason;
};

struct QcResult {
    std::vector<Segment> accepted;
    std::vector<QcRejection> rejected;
};

// Applies the per-(view, chamber) gates. Segments whose chamber has no
// configured gate pass through unchecked.
QcResult qc_filter(std::vector<Segment> segments, const QcConfig& config, View view);

// Maps anonymous segments to chambers by layout, assuming apex-up frames:
// ventricles sit above atria (smaller centroid row) and the left heart sits
// on screen right (larger centroid col) unless mirrored. Requires exactly
// 2 segments for A2C, 4 for A4C and 1 for SAX; anything else marks the
// frame unusable (nullopt). Results come back in a fixed chamber order.
std::optional<std::vector<Segment>> assign_chambers(std::vector<Segment> segments, View view,
                                                    bool mirrored = false);

// Vertically stretches an LV mask about its topmost (apical) row until
// bounding-box height/width reaches 2, when the mask is squatter than
// that; taller masks pass through unchanged. Nearest-neighbor resampling,
// clipped at the image bottom, holes refilled. Throws DegenerateInput on
// an empty mask.
BinaryMask stretch_lv(const BinaryMask& lv);

// Vertically stretches an RV mask about its bottommost (basal) row to the
// LV bounding-box height when the RV/LV height ratio falls below the gate.
BinaryMask stretch_rv(const BinaryMask& rv, const BinaryMask& lv, double height_ratio_gate = 0.8);

struct RindRanges {
    int dilate_min_px = 6;
    int dilate_max_px = 14;
    int erode_min_px = 3;
    int erode_max_px = 6;
};

// Builds a two-class map around a short-axis lumen: the myocardium ring is
// dilate(lumen, d) minus erode(lumen, e) and the lumen class is the eroded
// core, with d and e drawn uniformly from the configured ranges by the
// seeded generator (d first, then e). Throws DegenerateInput when the
// lumen is empty or vanishes under the drawn erosion.
LabelMap myocardial_rind(const BinaryMask& lumen, const RindRanges& ranges, std::uint64_t seed);

}  // namespace echoseg
