#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "echoseg/mask.hpp"
#include "echoseg/shapeqc.hpp"

namespace echoseg {

// Long-axis description of a segmented chamber: physical area, axis length
// and the perpendicular chamber widths at the midpoints of n equal slabs
// along the axis (the disk diameters of the method-of-disks).
struct ChamberGeometry {
    Chamber chamber = Chamber::background;
    double area_cm2 = 0.0;
    double length_cm = 0.0;
    std::vector<double> disk_diameters_cm;
};

// Measures a chamber from a label map. The long axis is the principal
// moment axis of the pixel set, oriented apex (low row) to base (high
// row); lengths and widths include the one-pixel footprint so a rasterized
// shape reproduces its continuous extents. Returns nullopt when the
// chamber has no pixels; throws DegenerateInput when the axis has zero
// extent.
std::optional<ChamberGeometry> chamber_geometry(const LabelMap& label, Chamber chamber,
                                                int n_disks = 20);

// Biplane method of disks: V = pi/4 * sum(a_i * b_i) * L / N with L the
// longer of the two view lengths. Both geometries must carry the same
// number of disks. Result in mL.
double biplane_volume(const ChamberGeometry& plane_a, const ChamberGeometry& plane_b);

// Single-plane method of disks: V = pi/4 * sum(d_i^2) * L / N, in mL.
double single_plane_volume(const ChamberGeometry& plane);

// Percent ejection fraction 100 * (edv - esv) / edv; edv must be positive.
double ejection_fraction(double edv_ml, double esv_ml);

// Area-length LV mass in grams from short-axis epicardial (a1) and
// endocardial (a2) areas and the long-axis length a_plus_d. The wall
// thickness defaults to the difference of the equivalent-circle radii.
double lv_mass_area_length(double a1_cm2, double a2_cm2, double a_plus_d_cm,
                           std::optional<double> wall_thickness_cm = std::nullopt);

// Body-surface-area indexing.
double index_by_bsa(double value, double bsa_m2);

// Per-video area series of one chamber; frame order as acquired.
struct VideoAreas {
    std::string video_id;
    std::vector<std::pair<int, double>> areas;  // (frame index, area)
};

struct EdEsPick {
    std::string video_id;
    int ed_frame = 0;
    int es_frame = 0;
    double ed_value = 0.0;
    double es_value = 0.0;
};

// End-diastole = the frame with the largest area over all videos;
// end-systole = the smallest frame of that same video. Earliest frame
// wins ties. A flat series in the chosen video means no visible
// contraction, signaled as nullopt.
std::optional<EdEsPick> find_ed_es(const std::vector<VideoAreas>& videos);

// One segmented frame feeding the study-level measurements.
struct MeasuredFrame {
    std::string video_id;
    int frame_index = 0;
    View view = View::a2c;
    const LabelMap* label = nullptr;
};

// Named measurement values plus any caveats hit along the way. Keys follow
// the report vocabulary: lvedv_ml, lvesv_ml, lvef_pct, lv_mass_g,
// la_vol_ml, ra_vol_ml, rveda_cm2, rvesa_cm2, and *_per_m2 variants when
// a BSA is supplied.
struct MeasurementSet {
    std::map<std::string, double> values;
    std::vector<std::string> warnings;
};

// Derives the chamber measurements of one study from its segmented frames.
// Volumes use the biplane method when both long-axis views contribute and
// fall back to single-plane otherwise; LV mass needs a short-axis frame
// with a myocardium class plus at least one long-axis LV length.
MeasurementSet measure_study(const std::vector<MeasuredFrame>& frames,
                             std::optional<double> bsa_m2, int n_disks = 20);

}  // namespace echoseg
