#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "echoseg/mask.hpp"
#include "echoseg/measure.hpp"
#include "echoseg/raster.hpp"
#include "echoseg/shapeqc.hpp"

namespace echoseg {

// One chamber rendered as an ellipse, all lengths in cm. The contraction
// fractions scale the semi-axes at end-systole; atrial chambers run in
// counter-phase (smallest at t=0, largest mid-cycle).
struct ChamberEllipse {
    Chamber chamber = Chamber::LV;
    double center_row_cm = 0.0;
    double center_col_cm = 0.0;
    double semi_long_cm = 0.0;   // along the long axis (vertical at angle 0)
    double semi_short_cm = 0.0;
    double angle_deg = 0.0;      // long-axis tilt from vertical
    double contract_long = 0.0;  // fraction of the semi-axis lost at ES
    double contract_short = 0.0;
    bool atrial_phase = false;
};

struct PhantomSpec {
    View view = View::a2c;
    std::vector<ChamberEllipse> chambers;
    int frames_per_cycle = 8;
    double speckle = 0.35;            // multiplicative noise scale in [0,1]
    double chamber_intensity = 0.05;  // blood pool base level
    double tissue_intensity = 0.5;
    double rind_width_cm = 0.55;      // SAX truth myocardium ring width
    int size_px = 256;
    double spacing_mm = 0.5;
    SectorGeometry sector{4.0, 128.0, 90.0, 248.0};
    std::uint64_t seed = 0;
};

struct PhantomOutput {
    std::vector<Raster> frames;
    std::vector<LabelMap> truth;
    MeasurementSet analytic;
};

// Renders one cardiac cycle: dark chamber ellipses on bright speckled
// tissue inside the sector, with the exact rasterized ellipses as truth and
// closed-form measurements from the continuous parameters. Deterministic
// per seed. Rejects specs whose ellipses overlap or leave the sector.
PhantomOutput generate(const PhantomSpec& spec);

enum class DegradeMode { dropout, blur, gain };

struct DegradeParams {
    // dropout: multiply by attenuation inside the angular wedge
    // [angle_from, angle_to] degrees from the sector's vertical, within the
    // radial range [radius_from, radius_to] as fractions of sector depth.
    double angle_from_deg = -40.0;
    double angle_to_deg = -34.0;
    double attenuation = 1.0;  // 1 = identity
    double radius_from = 0.45;
    double radius_to = 0.95;
    // blur: Gaussian sigma in pixels (0 = identity)
    double blur_sigma_px = 0.0;
    // gain: additive shift of in-sector intensities, clamped to [0,1]
    double gain_shift = 0.0;
};

// Simulates acquisition problems on a frame; truth labels are unaffected.
Raster degrade(const Raster& frame, DegradeMode mode, const DegradeParams& params,
               std::uint64_t seed = 0);

// Study-coherent phantom parameters: one anatomy scaled uniformly about
// the sector apex, shared across the three views so that cross-view
// measurements (biplane volumes, mass) are mutually consistent.
struct StudyPhantomParams {
    double scale = 1.0;           // keep within [0.96, 1.08] to respect the QC gates
    double contract_scale = 1.0;  // keep within [0.90, 1.10]
    int frames_per_cycle = 8;
    double speckle = 0.35;
    std::uint64_t seed = 0;
};

// Per-view spec of the default anatomy under the given study parameters.
PhantomSpec make_view_spec(View view, const StudyPhantomParams& params);

// Closed-form measurements of the default anatomy (prolate-spheroid
// volumes from the shared LV axes, ED/ES areas, SAX lumen/rind areas).
MeasurementSet analytic_study_measurements(const StudyPhantomParams& params);

}  // namespace echoseg
