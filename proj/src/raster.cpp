#include "echoseg/raster.hpp"

#include <algorithm>
#include <cmath>

namespace echoseg {

bool SectorGeometry::contains(double row, double col) const {
    double dy = row - apex_row;
    double dx = col - apex_col;
    double dist = std::sqrt(dx * dx + dy * dy);
    if (dist > depth_px) return false;
    if (dist == 0.0) return true;
    double cos_from_down = dy / dist;
    double half_angle_rad = opening_angle_deg * 0.5 * M_PI / 180.0;
    return std::acos(std::clamp(cos_from_down, -1.0, 1.0)) <= half_angle_rad;
}

void SectorGeometry::validate(int /*width*/, int height) const {
    if (!(opening_angle_deg > 0.0 && opening_angle_deg < 180.0))
        throw std::invalid_argument("sector: opening angle must be in (0, 180) degrees");
    if (depth_px < 0.0) throw std::invalid_argument("sector: negative depth");
    if (depth_px > static_cast<double>(height))
        throw std::invalid_argument("sector: depth exceeds image height");
}

Raster Raster::zeros(int width, int height, double spacing_mm, SectorGeometry sector) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("raster: non-positive dimensions");
    if (spacing_mm <= 0.0) throw std::invalid_argument("raster: non-positive spacing");
    Raster r;
    r.width = width;
    r.height = height;
    r.spacing_mm = spacing_mm;
    r.sector = sector;
    r.pixels.assign(static_cast<std::size_t>(width) * height, 0.0f);
    return r;
}

void apply_sector_mask(Raster& img) {
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            if (!img.sector.contains(r, c)) img.at(r, c) = 0.0f;
}

namespace {

// Box-average resample, exact partial-pixel coverage. Used when shrinking.
Raster resample_area(const Raster& src, int out_w, int out_h) {
    Raster out;
    out.width = out_w;
    out.height = out_h;
    out.pixels.assign(static_cast<std::size_t>(out_w) * out_h, 0.0f);
    double sy = static_cast<double>(src.height) / out_h;
    double sx = static_cast<double>(src.width) / out_w;
    for (int r = 0; r < out_h; ++r) {
        double y0 = r * sy, y1 = (r + 1) * sy;
        int iy0 = static_cast<int>(std::floor(y0));
        int iy1 = std::min(static_cast<int>(std::ceil(y1)), src.height);
        for (int c = 0; c < out_w; ++c) {
            double x0 = c * sx, x1 = (c + 1) * sx;
            int ix0 = static_cast<int>(std::floor(x0));
            int ix1 = std::min(static_cast<int>(std::ceil(x1)), src.width);
            double acc = 0.0, wsum = 0.0;
            for (int iy = iy0; iy < iy1; ++iy) {
                double wy = std::min(y1, iy + 1.0) - std::max(y0, static_cast<double>(iy));
                if (wy <= 0.0) continue;
                for (int ix = ix0; ix < ix1; ++ix) {
                    double wx = std::min(x1, ix + 1.0) - std::max(x0, static_cast<double>(ix));
                    if (wx <= 0.0) continue;
                    acc += wy * wx * src.at(iy, ix);
                    wsum += wy * wx;
                }
            }
            out.at(r, c) = wsum > 0.0 ? static_cast<float>(acc / wsum) : 0.0f;
        }
    }
    return out;
}

// Bilinear resample at pixel centers. Used when enlarging.
Raster resample_bilinear(const Raster& src, int out_w, int out_h) {
    Raster out;
    out.width = out_w;
    out.height = out_h;
    out.pixels.assign(static_cast<std::size_t>(out_w) * out_h, 0.0f);
    double sy = static_cast<double>(src.height) / out_h;
    double sx = static_cast<double>(src.width) / out_w;
    for (int r = 0; r < out_h; ++r) {
        double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
        int y0 = static_cast<int>(y);
        int y1 = std::min(y0 + 1, src.height - 1);
        double fy = y - y0;
        for (int c = 0; c < out_w; ++c) {
            double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
            int x0 = static_cast<int>(x);
            int x1 = std::min(x0 + 1, src.width - 1);
            double fx = x - x0;
            double v = (1 - fy) * ((1 - fx) * src.at(y0, x0) + fx * src.at(y0, x1)) +
                       fy * ((1 - fx) * src.at(y1, x0) + fx * src.at(y1, x1));
            out.at(r, c) = static_cast<float>(v);
        }
    }
    return out;
}

}  // namespace

Raster standardize(const Raster& raw, double target_spacing_mm, int target_size) {
    if (raw.width <= 0 || raw.height <= 0 || raw.pixels.size() != static_cast<std::size_t>(raw.width) * raw.height)
        throw std::invalid_argument("standardize: degenerate raster");
    if (raw.spacing_mm <= 0.0) throw std::invalid_argument("standardize: non-positive spacing");
    if (target_spacing_mm <= 0.0 || target_size <= 0)
        throw std::invalid_argument("standardize: bad target parameters");

    double scale = raw.spacing_mm / target_spacing_mm;

    // Resample to the target spacing. scale == 1 keeps pixels bit-identical.
    Raster mid;
    int out_w = std::max(1, static_cast<int>(std::llround(raw.width * scale)));
    int out_h = std::max(1, static_cast<int>(std::llround(raw.height * scale)));
    if (out_w == raw.width && out_h == raw.height) {
        mid = raw;
    } else if (scale < 1.0) {
        mid = resample_area(raw, out_w, out_h);
    } else {
        mid = resample_bilinear(raw, out_w, out_h);
    }
    double row_scale = static_cast<double>(out_h) / raw.height;
    double col_scale = static_cast<double>(out_w) / raw.width;

    // Center-crop or zero-pad each axis to the square target.
    Raster out;
    out.width = target_size;
    out.height = target_size;
    out.spacing_mm = target_spacing_mm;
    out.pixels.assign(static_cast<std::size_t>(target_size) * target_size, 0.0f);
    int off_r = (target_size - out_h) / 2;  // negative means crop
    int off_c = (target_size - out_w) / 2;
    for (int r = 0; r < target_size; ++r) {
        int sr = r - off_r;
        if (sr < 0 || sr >= out_h) continue;
        for (int c = 0; c < target_size; ++c) {
            int sc = c - off_c;
            if (sc < 0 || sc >= out_w) continue;
            out.at(r, c) = mid.at(sr, sc);
        }
    }
    out.sector.apex_row = raw.sector.apex_row * row_scale + off_r;
    out.sector.apex_col = raw.sector.apex_col * col_scale + off_c;
    out.sector.opening_angle_deg = raw.sector.opening_angle_deg;
    out.sector.depth_px = std::min(raw.sector.depth_px * row_scale, static_cast<double>(target_size));

    // Min-max normalize over the sector; a flat sector becomes all zeros.
    float lo = 1e30f, hi = -1e30f;
    bool any = false;
    for (int r = 0; r < target_size; ++r)
        for (int c = 0; c < target_size; ++c)
            if (out.sector.contains(r, c)) {
                float v = out.at(r, c);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                any = true;
            }
    if (!any || hi <= lo) {
        std::fill(out.pixels.begin(), out.pixels.end(), 0.0f);
        return out;
    }
    float span = hi - lo;
    for (int r = 0; r < target_size; ++r)
        for (int c = 0; c < target_size; ++c) {
            if (!out.sector.contains(r, c)) {
                out.at(r, c) = 0.0f;
            } else {
                out.at(r, c) = std::clamp((out.at(r, c) - lo) / span, 0.0f, 1.0f);
            }
        }
    return out;
}

namespace {

void check_image(const Raster& img) {
    if (img.width <= 0 || img.height <= 0 ||
        img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
        throw std::invalid_argument("filter: degenerate raster");
}

Raster bilateral_filter(const Raster& img, const FilterParams& p) {
    if (p.sigma_spatial_px <= 0.0 || p.sigma_range <= 0.0)
        throw std::invalid_argument("bilateral: sigmas must be positive");
    int radius = static_cast<int>(std::ceil(3.0 * p.sigma_spatial_px));
    double r2max = 9.0 * p.sigma_spatial_px * p.sigma_spatial_px;
    int side = 2 * radius + 1;

    // Spatial weights on a disk of radius 3*sigma; zero outside the disk.
    std::vector<double> wspatial(static_cast<std::size_t>(side) * side, 0.0);
    std::vector<int> dc_extent(radius + 1, -1);
    for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
            double d2 = static_cast<double>(dr) * dr + static_cast<double>(dc) * dc;
            if (d2 > r2max) continue;
            wspatial[static_cast<std::size_t>(dr + radius) * side + (dc + radius)] =
                std::exp(-d2 / (2.0 * p.sigma_spatial_px * p.sigma_spatial_px));
            dc_extent[std::abs(dr)] = std::max(dc_extent[std::abs(dr)], std::abs(dc));
        }
    }

    // Range kernel as a lookup table over |dI| in [0, 1], linear interpolation.
    constexpr int kLutBins = 4096;
    std::vector<double> lut(kLutBins + 1);
    for (int i = 0; i <= kLutBins; ++i) {
        double u = static_cast<double>(i) / kLutBins;
        lut[i] = std::exp(-u * u / (2.0 * p.sigma_range * p.sigma_range));
    }

    Raster out = img;
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            if (!img.sector.contains(r, c)) {
                out.at(r, c) = 0.0f;
                continue;
            }
            double center = img.at(r, c);
            double num = 0.0, den = 0.0;
            int dr0 = std::max(-radius, -r);
            int dr1 = std::min(radius, img.height - 1 - r);
            for (int dr = dr0; dr <= dr1; ++dr) {
                int ext = dc_extent[std::abs(dr)];
                if (ext < 0) continue;
                int dc0 = std::max(-ext, -c);
                int dc1 = std::min(ext, img.width - 1 - c);
                const double* wrow = &wspatial[static_cast<std::size_t>(dr + radius) * side + radius];
                const float* prow = &img.pixels[static_cast<std::size_t>(r + dr) * img.width + c];
                for (int dc = dc0; dc <= dc1; ++dc) {
                    double ws = wrow[dc];
                    if (ws == 0.0) continue;
                    double v = prow[dc];
                    double u = std::clamp(std::fabs(v - center), 0.0, 1.0) * kLutBins;
                    int bin = static_cast<int>(u);
                    double frac = u - bin;
                    double wr = bin >= kLutBins ? lut[kLutBins]
                                                : lut[bin] * (1.0 - frac) + lut[bin + 1] * frac;
                    double w = ws * wr;
                    num += w * v;
                    den += w;
                }
            }
            out.at(r, c) = den > 0.0 ? static_cast<float>(num / den) : img.at(r, c);
        }
    }
    return out;
}

Raster median_filter(const Raster& img, int kernel) {
    if (kernel < 3 || kernel % 2 == 0) throw std::invalid_argument("median: kernel must be odd and >= 3");
    int radius = kernel / 2;
    Raster out = img;
    std::vector<float> window;
    window.reserve(static_cast<std::size_t>(kernel) * kernel);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            if (!img.sector.contains(r, c)) {
                out.at(r, c) = 0.0f;
                continue;
            }
            window.clear();
            int r0 = std::max(0, r - radius), r1 = std::min(img.height - 1, r + radius);
            int c0 = std::max(0, c - radius), c1 = std::min(img.width - 1, c + radius);
            for (int rr = r0; rr <= r1; ++rr)
                for (int cc = c0; cc <= c1; ++cc) window.push_back(img.at(rr, cc));
            auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
            std::nth_element(window.begin(), mid, window.end());
            out.at(r, c) = *mid;
        }
    }
    return out;
}

// Binomial coefficient row of a given length (Pascal triangle row n-1).
std::vector<double> binomial_row(int length) {
    std::vector<double> row(static_cast<std::size_t>(length), 0.0);
    row[0] = 1.0;
    for (int i = 1; i < length; ++i)
        for (int j = i; j >= 1; --j) row[j] += row[j - 1];
    return row;
}

// Separable convolution with replicate border handling.
std::vector<double> conv_separable(const std::vector<double>& in, int w, int h,
                                   const std::vector<double>& kx, const std::vector<double>& ky) {
    int rx = static_cast<int>(kx.size()) / 2;
    int ry = static_cast<int>(ky.size()) / 2;
    std::vector<double> tmp(in.size()), out(in.size());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int k = -rx; k <= rx; ++k) {
                int cc = std::clamp(c + k, 0, w - 1);
                acc += kx[static_cast<std::size_t>(k + rx)] * in[static_cast<std::size_t>(r) * w + cc];
            }
            tmp[static_cast<std::size_t>(r) * w + c] = acc;
        }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int k = -ry; k <= ry; ++k) {
                int rr = std::clamp(r + k, 0, h - 1);
                acc += ky[static_cast<std::size_t>(k + ry)] * tmp[static_cast<std::size_t>(rr) * w + c];
            }
            out[static_cast<std::size_t>(r) * w + c] = acc;
        }
    return out;
}

Raster laplacian_filter(const Raster& img, int kernel) {
    if (kernel < 3 || kernel % 2 == 0)
        throw std::invalid_argument("laplacian: kernel must be odd and >= 3");

    // Smoothed second derivative, built like the extended Sobel kernels:
    // a binomial smoothing row and a [1,-2,1] core widened by a binomial.
    std::vector<double> smooth = binomial_row(kernel);
    double ssum = 0.0;
    for (double v : smooth) ssum += v;
    for (double& v : smooth) v /= ssum;
    std::vector<double> core{1.0, -2.0, 1.0};
    std::vector<double> deriv = core;
    if (kernel > 3) {
        std::vector<double> widen = binomial_row(kernel - 2);
        deriv.assign(static_cast<std::size_t>(kernel), 0.0);
        for (std::size_t i = 0; i < core.size(); ++i)
            for (std::size_t j = 0; j < widen.size(); ++j) deriv[i + j] += core[i] * widen[j];
    }

    std::vector<double> in(img.pixels.begin(), img.pixels.end());
    std::vector<double> gxx = conv_separable(in, img.width, img.height, deriv, smooth);
    std::vector<double> gyy = conv_separable(in, img.width, img.height, smooth, deriv);

    Raster out = img;
    double lo = 1e300, hi = -1e300;
    std::vector<double> mag(in.size(), 0.0);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            std::size_t i = static_cast<std::size_t>(r) * img.width + c;
            mag[i] = std::fabs(gxx[i] + gyy[i]);
            if (img.sector.contains(r, c)) {
                lo = std::min(lo, mag[i]);
                hi = std::max(hi, mag[i]);
            }
        }
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            std::size_t i = static_cast<std::size_t>(r) * img.width + c;
            if (!img.sector.contains(r, c) || hi <= lo)
                out.at(r, c) = 0.0f;
            else
                out.at(r, c) = static_cast<float>(std::clamp((mag[i] - lo) / (hi - lo), 0.0, 1.0));
        }
    return out;
}

Raster contrast_stretch_filter(const Raster& img, const FilterParams& p) {
    if (!(p.low_percentile >= 0.0 && p.high_percentile <= 100.0 && p.low_percentile < p.high_percentile))
        throw std::invalid_argument("contrast_stretch: bad percentile bounds");
    std::vector<float> vals;
    vals.reserve(img.pixels.size());
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            if (img.sector.contains(r, c)) vals.push_back(img.at(r, c));
    Raster out = img;
    if (vals.empty()) {
        std::fill(out.pixels.begin(), out.pixels.end(), 0.0f);
        return out;
    }
    double lo = percentile(vals, p.low_percentile);
    double hi = percentile(vals, p.high_percentile);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            if (!img.sector.contains(r, c) || hi <= lo)
                out.at(r, c) = 0.0f;
            else
                out.at(r, c) = static_cast<float>(std::clamp((img.at(r, c) - lo) / (hi - lo), 0.0, 1.0));
        }
    return out;
}

}  // namespace

Raster filter(const Raster& img, FilterKind kind, const FilterParams& params) {
    check_image(img);
    switch (kind) {
        case FilterKind::bilateral: return bilateral_filter(img, params);
        case FilterKind::median: return median_filter(img, params.kernel);
        case FilterKind::laplacian: return laplacian_filter(img, params.kernel);
        case FilterKind::contrast_stretch: return contrast_stretch_filter(img, params);
    }
    throw std::invalid_argument("filter: unknown kind");
}

Raster mirror_horizontal(const Raster& img) {
    check_image(img);
    Raster out = img;
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) out.at(r, c) = img.at(r, img.width - 1 - c);
    out.sector.apex_col = static_cast<double>(img.width - 1) - img.sector.apex_col;
    return out;
}

}  // namespace echoseg
