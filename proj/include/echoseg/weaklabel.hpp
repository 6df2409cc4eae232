#pragma once

#include <optional>
#include <vector>

#include "echoseg/mask.hpp"
#include "echoseg/raster.hpp"

namespace echoseg {

// Exact squared Euclidean distance to the nearest zero pixel, computed with
// the two-pass lower-envelope algorithm. Pixels outside the mask get 0.
std::vector<double> squared_distance_transform(const BinaryMask& mask);

struct BinarizeParams {
    double threshold = 0.1;   // blood pool = pixels strictly below this
    int min_region_px = 500;  // smaller dark regions are dropped
    int max_hole_px = 1000;   // brighter holes up to this size are filled
};

// Thresholds the dark blood pool inside the sector, drops small regions,
// and fills small enclosed holes. Returns nullopt when nothing survives.
std::optional<BinaryMask> binarize_clean(const Raster& img, const BinarizeParams& params = {});

// Proposes watershed seeds at maxima of the distance transform. A pixel
// qualifies when it is the deepest point of its min_distance square
// neighborhood; qualifying pixels are then kept greedily in decreasing
// depth order (ties by row, then col), suppressing any candidate closer
// than min_distance_px to an already kept seed. Empty mask yields no seeds.
std::vector<Point> distance_seeds(const BinaryMask& mask, int min_distance_px = 20);

// Watershed basins; 0 = outside the mask (or unreachable from any seed),
// 1..n = basin of the n-th seed in input order.
struct BasinMap {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> basin;
    int count = 0;

    std::int32_t at(int row, int col) const {
        return basin[static_cast<std::size_t>(row) * width + col];
    }
    BinaryMask mask_of(int b, double spacing_mm) const;
};

// Marker-controlled watershed on the negated distance transform, flooding
// restricted to the mask, 8-connected. Flood levels rise monotonically
// (a pixel inherits the level of the wave that reached it when deeper than
// the current waterline) and ties are processed first-in first-out, so
// fronts from different seeds advance evenly across flat terrain.
// Throws if no seeds are given or a seed lies outside the mask.
BasinMap watershed(const BinaryMask& mask, const std::vector<Point>& seeds);

struct Circle {
    int center_row = 0;
    int center_col = 0;
    int radius = 0;
    long votes = 0;
};

struct HoughParams {
    int radius_min_px = 20;
    int radius_max_px = 80;
    double min_center_distance_px = 400.0;
    double vote_floor_fraction = 0.5;  // of the rasterized ring size at that radius
    double edge_percentile = 90.0;     // edge pixels = sector values above this percentile
};

// Circle detection on an edge-strength image (typically the normalized
// Laplacian magnitude). Edge pixels vote for every candidate center on the
// rasterized circle of each admissible radius. Candidates below the vote
// floor are dropped; survivors are sorted by votes (then row, col, radius)
// and greedily thinned so kept centers stay at least min_center_distance
// apart. Returns an empty list when nothing clears the floor.
std::vector<Circle> hough_circles(const Raster& edges, const HoughParams& params = {});

// 8-connected component, pixels stored as row-major linear indices in
// ascending order.
struct Component {
    std::vector<std::int32_t> pixels;
    int min_row = 0, max_row = 0, min_col = 0, max_col = 0;

    std::size_t size() const { return pixels.size(); }
};

// Components ordered by decreasing size; equal sizes ordered by their
// topmost-leftmost pixel.
std::vector<Component> connected_components(const BinaryMask& mask);

BinaryMask mask_from_component(const Component& comp, int width, int height, double spacing_mm);

enum class MorphOp { dilate, erode, fill_holes, convex_hull };

// Morphology with an exact Euclidean disk structuring element of the given
// radius (dilate/erode; radius 0 is the identity). fill_holes fills
// 4-connected background regions not reaching the border; convex_hull
// rasterizes the convex hull of the set pixel centers. radius is ignored
// for the latter two.
BinaryMask morphology(const BinaryMask& mask, MorphOp op, int radius_px = 1);

// Ring around the mask boundary: dilation of the convex hull minus its
// erosion. Throws std::invalid_argument when the hull has fewer than
// 9 pixels (degenerate segment) or dilate_px < erode_px.
BinaryMask edge_ring(const BinaryMask& mask, int dilate_px, int erode_px);

}  // namespace echoseg
