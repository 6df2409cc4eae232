#pragma once

#include <vector>

#include "echoseg/common.hpp"

namespace echoseg {

// Ultrasound fan geometry in pixel units. The apex is the transducer
// origin; the fan opens downward (increasing row), symmetric about the
// vertical through the apex, out to depth_px.
struct SectorGeometry {
    double apex_row = 0.0;
    double apex_col = 0.0;
    double opening_angle_deg = 90.0;  // full opening, (0, 180)
    double depth_px = 0.0;

    bool contains(double row, double col) const;
    void validate(int width, int height) const;
};

// Single grayscale frame. Pixels are row-major floats in [0, 1];
// everything outside the sector is exactly 0.
struct Raster {
    int width = 0;
    int height = 0;
    double spacing_mm = 0.0;  // isotropic physical pixel size
    SectorGeometry sector;
    std::vector<float> pixels;

    float at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
    float& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height && col >= 0 && col < width;
    }

    static Raster zeros(int width, int height, double spacing_mm, SectorGeometry sector);
};

// Zeroes every pixel outside the sector, in place.
void apply_sector_mask(Raster& img);

// Resamples to the target physical spacing (box averaging when shrinking,
// bilinear when enlarging), then center-crops or zero-pads to a square
// target_size, then min-max normalizes intensities over in-sector pixels.
// A constant-intensity sector comes out as all zeros. The sector geometry
// is rescaled and shifted along with the pixels.
Raster standardize(const Raster& raw, double target_spacing_mm = 0.5, int target_size = 256);

enum class FilterKind { bilateral, median, laplacian, contrast_stretch };

struct FilterParams {
    // bilateral
    double sigma_spatial_px = 15.0;
    double sigma_range = 0.25;
    // median / laplacian kernel size (odd, >= 3)
    int kernel = 3;
    // contrast stretch percentile cutoffs
    double low_percentile = 2.0;
    double high_percentile = 98.0;
};

// Edge-preserving and contrast filters. All variants leave out-of-sector
// pixels at exactly 0 and keep in-sector values inside [0, 1]:
//  - bilateral: Gaussian spatial x Gaussian range weights, kernel truncated
//    to a disk of radius 3*sigma_spatial, normalized over in-image taps.
//  - median: k x k window clipped at the image border; for an even number
//    of samples the upper median is taken.
//  - laplacian: separable smoothed second-derivative sum (Sobel-style
//    construction), then |L| min-max rescaled to [0, 1] over the sector.
//  - contrast_stretch: linear map of the in-sector [p_low, p_high]
//    percentile range onto [0, 1], clamped.
Raster filter(const Raster& img, FilterKind kind, const FilterParams& params = {});

// Left-right mirror; the sector apex column flips accordingly.
Raster mirror_horizontal(const Raster& img);

}  // namespace echoseg
