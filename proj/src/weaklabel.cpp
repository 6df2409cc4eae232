#include "echoseg/weaklabel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <tuple>

namespace echoseg {

namespace {

constexpr double kInf = 1e20;

// 1-D squared distance transform, lower envelope of parabolas.
void dt_1d(const std::vector<double>& f, std::vector<double>& d, int n,
           std::vector<int>& v, std::vector<double>& z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            int p = v[k];
            s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
                (2.0 * q - 2.0 * p);
            if (s <= z[k] && k > 0) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace

std::vector<double> squared_distance_transform(const BinaryMask& mask) {
    int w = mask.width, h = mask.height;
    std::vector<double> dist(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = mask.bits[i] ? kInf : 0.0;

    int n = std::max(w, h);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) f[r] = dist[static_cast<std::size_t>(r) * w + c];
        dt_1d(f, d, h, v, z);
        for (int r = 0; r < h; ++r) dist[static_cast<std::size_t>(r) * w + c] = d[r];
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) f[c] = dist[static_cast<std::size_t>(r) * w + c];
        dt_1d(f, d, w, v, z);
        for (int c = 0; c < w; ++c) dist[static_cast<std::size_t>(r) * w + c] = d[c];
    }
    return dist;
}

namespace {

// Labels 8-connected components in scan order; returns component count.
int label_components(const BinaryMask& mask, std::vector<std::int32_t>& labels) {
    int w = mask.width, h = mask.height;
    labels.assign(static_cast<std::size_t>(w) * h, 0);
    int next = 0;
    std::deque<int> queue;
    for (int start = 0; start < w * h; ++start) {
        if (!mask.bits[start] || labels[start]) continue;
        ++next;
        labels[start] = next;
        queue.clear();
        queue.push_back(start);
        while (!queue.empty()) {
            int p = queue.front();
            queue.pop_front();
            int r = p / w, c = p % w;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                    int q = rr * w + cc;
                    if (mask.bits[q] && !labels[q]) {
                        labels[q] = next;
                        queue.push_back(q);
                    }
                }
        }
    }
    return next;
}

// Fills 4-connected background regions that do not reach the image border.
// With max_hole_px >= 0 only regions up to that size are filled; pass a
// negative value to fill every enclosed region.
void fill_enclosed_background(BinaryMask& mask, long max_hole_px) {
    int w = mask.width, h = mask.height;
    std::vector<std::uint8_t> outside(static_cast<std::size_t>(w) * h, 0);
    std::deque<int> queue;
    auto push_bg = [&](int r, int c) {
        int p = r * w + c;
        if (!mask.bits[p] && !outside[p]) {
            outside[p] = 1;
            queue.push_back(p);
        }
    };
    for (int c = 0; c < w; ++c) {
        push_bg(0, c);
        push_bg(h - 1, c);
    }
    for (int r = 0; r < h; ++r) {
        push_bg(r, 0);
        push_bg(r, w - 1);
    }
    while (!queue.empty()) {
        int p = queue.front();
        queue.pop_front();
        int r = p / w, c = p % w;
        if (r > 0) push_bg(r - 1, c);
        if (r < h - 1) push_bg(r + 1, c);
        if (c > 0) push_bg(r, c - 1);
        if (c < w - 1) push_bg(r, c + 1);
    }
    if (max_hole_px < 0) {
        for (std::size_t i = 0; i < mask.bits.size(); ++i)
            if (!mask.bits[i] && !outside[i]) mask.bits[i] = 1;
        return;
    }
    // Size-limited: find each enclosed region and fill only the small ones.
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
    std::vector<int> region;
    for (int start = 0; start < w * h; ++start) {
        if (mask.bits[start] || outside[start] || seen[start]) continue;
        region.clear();
        seen[start] = 1;
        queue.clear();
        queue.push_back(start);
        while (!queue.empty()) {
            int p = queue.front();
            queue.pop_front();
            region.push_back(p);
            int r = p / w, c = p % w;
            auto visit = [&](int rr, int cc) {
                int q = rr * w + cc;
                if (!mask.bits[q] && !outside[q] && !seen[q]) {
                    seen[q] = 1;
                    queue.push_back(q);
                }
            };
            if (r > 0) visit(r - 1, c);
            if (r < h - 1) visit(r + 1, c);
            if (c > 0) visit(r, c - 1);
            if (c < w - 1) visit(r, c + 1);
        }
        if (static_cast<long>(region.size()) <= max_hole_px)
            for (int p : region) mask.bits[p] = 1;
    }
}

}  // namespace

std::optional<BinaryMask> binarize_clean(const Raster& img, const BinarizeParams& params) {
    if (img.width <= 0 || img.height <= 0)
        throw std::invalid_argument("binarize_clean: degenerate raster");
    if (params.threshold <= 0.0 || params.threshold >= 1.0)
        throw std::invalid_argument("binarize_clean: threshold outside (0,1)");
    if (params.min_region_px < 0 || params.max_hole_px < 0)
        throw std::invalid_argument("binarize_clean: negative size limits");

    BinaryMask mask = BinaryMask::zeros(img.width, img.height, img.spacing_mm);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            if (img.sector.contains(r, c) && img.at(r, c) < params.threshold) mask.set(r, c, true);

    std::vector<std::int32_t> labels;
    int n = label_components(mask, labels);
    if (n > 0) {
        std::vector<long> sizes(static_cast<std::size_t>(n) + 1, 0);
        for (auto l : labels)
            if (l) ++sizes[l];
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] && sizes[labels[i]] < params.min_region_px) mask.bits[i] = 0;
    }
    fill_enclosed_background(mask, params.max_hole_px);
    if (mask.empty()) return std::nullopt;
    return mask;
}

std::vector<Point> distance_seeds(const BinaryMask& mask, int min_distance_px) {
    if (min_distance_px < 1) throw std::invalid_argument("distance_seeds: min_distance must be >= 1");
    if (mask.empty()) return {};
    std::vector<double> sq = squared_distance_transform(mask);
    int w = mask.width, h = mask.height;

    struct Cand {
        double depth;
        int row, col;
    };
    // A seed candidate must be the deepest point of its whole min_distance
    // square neighborhood, not merely of the 8 adjacent pixels; otherwise a
    // slightly wavy medial ridge sheds a trail of spurious shallow maxima.
    // Separable running maxima keep this O(pixels * min_distance).
    std::vector<double> rowmax(sq.size(), 0.0), winmax(sq.size(), 0.0);
    int m = min_distance_px;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double v = 0.0;
            for (int cc = std::max(0, c - m); cc <= std::min(w - 1, c + m); ++cc)
                v = std::max(v, sq[static_cast<std::size_t>(r) * w + cc]);
            rowmax[static_cast<std::size_t>(r) * w + c] = v;
        }
    for (int c = 0; c < w; ++c)
        for (int r = 0; r < h; ++r) {
            double v = 0.0;
            for (int rr = std::max(0, r - m); rr <= std::min(h - 1, r + m); ++rr)
                v = std::max(v, rowmax[static_cast<std::size_t>(rr) * w + c]);
            winmax[static_cast<std::size_t>(r) * w + c] = v;
        }

    std::vector<Cand> cands;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            std::size_t i = static_cast<std::size_t>(r) * w + c;
            if (mask.bits[i] && sq[i] == winmax[i]) cands.push_back({sq[i], r, c});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.depth != b.depth) return a.depth > b.depth;
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    });

    std::vector<Point> seeds;
    double min_sq = static_cast<double>(min_distance_px) * min_distance_px;
    for (const auto& c : cands) {
        bool ok = true;
        for (const auto& s : seeds) {
            double dr = c.row - s.row, dc = c.col - s.col;
            if (dr * dr + dc * dc < min_sq) {
                ok = false;
                break;
            }
        }
        if (ok) seeds.push_back({c.row, c.col});
    }
    return seeds;
}

BinaryMask BasinMap::mask_of(int b, double spacing_mm) const {
    BinaryMask m = BinaryMask::zeros(width, height, spacing_mm);
    for (std::size_t i = 0; i < basin.size(); ++i) m.bits[i] = basin[i] == b ? 1 : 0;
    return m;
}

BasinMap watershed(const BinaryMask& mask, const std::vector<Point>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("watershed unseeded");
    int w = mask.width, h = mask.height;
    for (const auto& s : seeds)
        if (!mask.in_bounds(s.row, s.col) || !mask.at(s.row, s.col))
            throw std::invalid_argument("watershed: seed outside mask");

    std::vector<double> sq = squared_distance_transform(mask);

    BasinMap out;
    out.width = w;
    out.height = h;
    out.count = static_cast<int>(seeds.size());
    out.basin.assign(static_cast<std::size_t>(w) * h, 0);

    struct Entry {
        double level;
        std::uint64_t order;
        int pixel;
    };
    auto later = [](const Entry& a, const Entry& b) {
        if (a.level != b.level) return a.level > b.level;
        return a.order > b.order;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(later)> heap(later);
    std::uint64_t counter = 0;

    for (std::size_t i = 0; i < seeds.size(); ++i) {
        int p = seeds[i].row * w + seeds[i].col;
        if (out.basin[p] != 0) throw std::invalid_argument("watershed: duplicate seed");
        out.basin[p] = static_cast<std::int32_t>(i + 1);
        heap.push({-sq[p], counter++, p});
    }
    while (!heap.empty()) {
        Entry e = heap.top();
        heap.pop();
        int r = e.pixel / w, c = e.pixel % w;
        std::int32_t b = out.basin[e.pixel];
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                int rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                int q = rr * w + cc;
                if (!mask.bits[q] || out.basin[q] != 0) continue;
                out.basin[q] = b;
                heap.push({std::max(-sq[q], e.level), counter++, q});
            }
    }
    return out;
}

namespace {

// Integer offsets whose rounded distance from the origin equals r.
std::vector<Point> ring_offsets(int r) {
    std::vector<Point> out;
    for (int dr = -r; dr <= r; ++dr)
        for (int dc = -r; dc <= r; ++dc) {
            double d = std::sqrt(static_cast<double>(dr) * dr + static_cast<double>(dc) * dc);
            if (static_cast<int>(std::llround(d)) == r) out.push_back({dr, dc});
        }
    return out;
}

}  // namespace

std::vector<Circle> hough_circles(const Raster& edges, const HoughParams& params) {
    if (edges.width <= 0 || edges.height <= 0)
        throw std::invalid_argument("hough_circles: degenerate raster");
    if (params.radius_min_px < 1 || params.radius_max_px < params.radius_min_px)
        throw std::invalid_argument("hough_circles: bad radius range");
    if (params.min_center_distance_px <= 0.0)
        throw std::invalid_argument("hough_circles: bad center distance");
    if (!(params.vote_floor_fraction > 0.0 && params.vote_floor_fraction <= 1.0))
        throw std::invalid_argument("hough_circles: vote floor outside (0,1]");
    if (!(params.edge_percentile >= 0.0 && params.edge_percentile < 100.0))
        throw std::invalid_argument("hough_circles: bad edge percentile");

    int w = edges.width, h = edges.height;
    std::vector<float> sector_vals;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (edges.sector.contains(r, c)) sector_vals.push_back(edges.at(r, c));
    if (sector_vals.empty()) return {};
    double thr = percentile(sector_vals, params.edge_percentile);

    std::vector<Point> edge_px;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (edges.sector.contains(r, c) && edges.at(r, c) > thr) edge_px.push_back({r, c});
    if (edge_px.empty()) return {};

    int n_radii = params.radius_max_px - params.radius_min_px + 1;
    std::vector<std::vector<Point>> rings(static_cast<std::size_t>(n_radii));
    for (int i = 0; i < n_radii; ++i) rings[i] = ring_offsets(params.radius_min_px + i);

    std::vector<std::int32_t> acc(static_cast<std::size_t>(n_radii) * w * h, 0);
    for (const auto& e : edge_px)
        for (int i = 0; i < n_radii; ++i) {
            std::int32_t* plane = &acc[static_cast<std::size_t>(i) * w * h];
            for (const auto& off : rings[i]) {
                int rr = e.row + off.row, cc = e.col + off.col;
                if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                ++plane[rr * w + cc];
            }
        }

    std::vector<Circle> cands;
    for (int i = 0; i < n_radii; ++i) {
        double floor = params.vote_floor_fraction * static_cast<double>(rings[i].size());
        const std::int32_t* plane = &acc[static_cast<std::size_t>(i) * w * h];
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                std::int32_t v = plane[r * w + c];
                if (v > 0 && static_cast<double>(v) >= floor)
                    cands.push_back({r, c, params.radius_min_px + i, v});
            }
    }
    std::sort(cands.begin(), cands.end(), [](const Circle& a, const Circle& b) {
        if (a.votes != b.votes) return a.votes > b.votes;
        if (a.center_row != b.center_row) return a.center_row < b.center_row;
        if (a.center_col != b.center_col) return a.center_col < b.center_col;
        return a.radius < b.radius;
    });

    std::vector<Circle> kept;
    double min_sq = params.min_center_distance_px * params.min_center_distance_px;
    for (const auto& c : cands) {
        bool ok = true;
        for (const auto& k : kept) {
            double dr = c.center_row - k.center_row, dc = c.center_col - k.center_col;
            if (dr * dr + dc * dc < min_sq) {
                ok = false;
                break;
            }
        }
        if (ok) kept.push_back(c);
    }
    return kept;
}

std::vector<Component> connected_components(const BinaryMask& mask) {
    std::vector<std::int32_t> labels;
    int n = label_components(mask, labels);
    std::vector<Component> comps(static_cast<std::size_t>(n));
    for (auto& c : comps) {
        c.min_row = mask.height;
        c.min_col = mask.width;
        c.max_row = -1;
        c.max_col = -1;
    }
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c) {
            std::int32_t l = labels[static_cast<std::size_t>(r) * mask.width + c];
            if (!l) continue;
            Component& comp = comps[static_cast<std::size_t>(l) - 1];
            comp.pixels.push_back(r * mask.width + c);
            comp.min_row = std::min(comp.min_row, r);
            comp.max_row = std::max(comp.max_row, r);
            comp.min_col = std::min(comp.min_col, c);
            comp.max_col = std::max(comp.max_col, c);
        }
    std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.pixels[0] < b.pixels[0];
    });
    return comps;
}

BinaryMask mask_from_component(const Component& comp, int width, int height, double spacing_mm) {
    BinaryMask m = BinaryMask::zeros(width, height, spacing_mm);
    for (auto p : comp.pixels) m.bits[static_cast<std::size_t>(p)] = 1;
    return m;
}

namespace {

BinaryMask dilate_mask(const BinaryMask& mask, int radius) {
    if (radius == 0) return mask;
    BinaryMask inv = mask;
    for (auto& b : inv.bits) b = b ? 0 : 1;
    std::vector<double> sq = squared_distance_transform(inv);  // distance to nearest set pixel
    BinaryMask out = mask;
    double r2 = static_cast<double>(radius) * radius;
    for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = sq[i] <= r2 ? 1 : 0;
    return out;
}

BinaryMask erode_mask(const BinaryMask& mask, int radius) {
    if (radius == 0) return mask;
    std::vector<double> sq = squared_distance_transform(mask);  // distance to nearest background
    BinaryMask out = mask;
    double r2 = static_cast<double>(radius) * radius;
    int w = mask.width, h = mask.height;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            std::size_t i = static_cast<std::size_t>(r) * w + c;
            bool interior = mask.bits[i] && sq[i] > r2 && r >= radius && c >= radius &&
                            r < h - radius && c < w - radius;
            out.bits[i] = interior ? 1 : 0;
        }
    return out;
}

long long cross(long long ox, long long oy, long long ax, long long ay, long long bx, long long by) {
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox);
}

// Monotone chain convex hull over (col, row) integer points; returns the
// hull in counterclockwise order (in image coordinates, row increasing
// downward, this traverses clockwise on screen, which is irrelevant for
// the containment test).
std::vector<Point> convex_hull_vertices(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        if (a.col != b.col) return a.col < b.col;
        return a.row < b.row;
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    std::size_t n = pts.size();
    if (n <= 2) return pts;
    std::vector<Point> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2].col, hull[k - 2].row, hull[k - 1].col, hull[k - 1].row,
                               pts[i].col, pts[i].row) <= 0)
            --k;
        hull[k++] = pts[i];
    }
    std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2].col, hull[k - 2].row, hull[k - 1].col, hull[k - 1].row,
                                   pts[i].col, pts[i].row) <= 0)
            --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

BinaryMask convex_hull_mask(const BinaryMask& mask) {
    std::vector<Point> pts;
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            if (mask.at(r, c)) pts.push_back({r, c});
    BinaryMask out = BinaryMask::zeros(mask.width, mask.height, mask.spacing_mm);
    if (pts.empty()) return out;

    std::vector<Point> hull = convex_hull_vertices(pts);
    if (hull.size() <= 2) {
        // Degenerate hull: every input point lies on one segment.
        for (const auto& p : pts) out.set(p.row, p.col, true);
        if (hull.size() == 2) {
            // Also rasterize integer points exactly on the segment.
            Point a = hull[0], b = hull[1];
            int steps = std::max(std::abs(b.row - a.row), std::abs(b.col - a.col));
            for (int s = 0; s <= steps; ++s) {
                long long num_r = static_cast<long long>(a.row) * (steps - s) +
                                  static_cast<long long>(b.row) * s;
                long long num_c = static_cast<long long>(a.col) * (steps - s) +
                                  static_cast<long long>(b.col) * s;
                if (num_r % steps == 0 && num_c % steps == 0)
                    out.set(static_cast<int>(num_r / steps), static_cast<int>(num_c / steps), true);
            }
        }
        return out;
    }

    int min_r = mask.height, max_r = -1, min_c = mask.width, max_c = -1;
    for (const auto& p : hull) {
        min_r = std::min(min_r, p.row);
        max_r = std::max(max_r, p.row);
        min_c = std::min(min_c, p.col);
        max_c = std::max(max_c, p.col);
    }
    std::size_t nv = hull.size();
    for (int r = min_r; r <= max_r; ++r)
        for (int c = min_c; c <= max_c; ++c) {
            bool inside = true;
            for (std::size_t i = 0; i < nv; ++i) {
                const Point& a = hull[i];
                const Point& b = hull[(i + 1) % nv];
                if (cross(a.col, a.row, b.col, b.row, c, r) < 0) {
                    inside = false;
                    break;
                }
            }
            if (inside) out.set(r, c, true);
        }
    return out;
}

}  // namespace

BinaryMask morphology(const BinaryMask& mask, MorphOp op, int radius_px) {
    if (mask.width <= 0 || mask.height <= 0)
        throw std::invalid_argument("morphology: degenerate mask");
    if ((op == MorphOp::dilate || op == MorphOp::erode) && radius_px < 0)
        throw std::invalid_argument("morphology: negative radius");
    switch (op) {
        case MorphOp::dilate: return dilate_mask(mask, radius_px);
        case MorphOp::erode: return erode_mask(mask, radius_px);
        case MorphOp::fill_holes: {
            BinaryMask out = mask;
            fill_enclosed_background(out, -1);
            return out;
        }
        case MorphOp::convex_hull: return convex_hull_mask(mask);
    }
    throw std::invalid_argument("morphology: unknown op");
}

BinaryMask edge_ring(const BinaryMask& mask, int dilate_px, int erode_px) {
    if (dilate_px < 0 || erode_px < 0) throw std::invalid_argument("edge_ring: negative radius");
    BinaryMask hull = morphology(mask, MorphOp::convex_hull);
    if (hull.count() < 9) throw DegenerateInput("edge_ring: degenerate segment");
    BinaryMask grown = dilate_mask(hull, dilate_px);
    BinaryMask shrunk = erode_mask(hull, erode_px);
    for (std::size_t i = 0; i < grown.bits.size(); ++i)
        if (shrunk.bits[i]) grown.bits[i] = 0;
    return grown;
}

}  // namespace echoseg
