#pragma once

#include <cstdint>
#include <vector>

#include "echoseg/common.hpp"

namespace echoseg {

// Binary pixel mask with physical spacing carried along so that areas can
// be reported in cm^2 without consulting the source frame.
struct BinaryMask {
    int width = 0;
    int height = 0;
    double spacing_mm = 0.0;
    std::vector<std::uint8_t> bits;

    bool at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col] != 0; }
    void set(int row, int col, bool v) {
        bits[static_cast<std::size_t>(row) * width + col] = v ? 1 : 0;
    }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height && col >= 0 && col < width;
    }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits) n += b != 0;
        return n;
    }
    bool empty() const { return count() == 0; }

    static BinaryMask zeros(int width, int height, double spacing_mm) {
        if (width <= 0 || height <= 0) throw std::invalid_argument("mask: non-positive dimensions");
        if (spacing_mm <= 0.0) throw std::invalid_argument("mask: non-positive spacing");
        BinaryMask m;
        m.width = width;
        m.height = height;
        m.spacing_mm = spacing_mm;
        m.bits.assign(static_cast<std::size_t>(width) * height, 0);
        return m;
    }
};

// Cardiac structure classes. Values are internal; the on-disk codes live
// in the io layer.
enum class Chamber : std::uint8_t {
    background = 0,
    LV = 1,
    LA = 2,
    RV = 3,
    RA = 4,
    LVMyo = 5,
};

const char* chamber_name(Chamber c);

// Per-pixel chamber classification. Classes are mutually exclusive.
struct LabelMap {
    int width = 0;
    int height = 0;
    double spacing_mm = 0.0;
    std::vector<std::uint8_t> classes;

    Chamber at(int row, int col) const {
        return static_cast<Chamber>(classes[static_cast<std::size_t>(row) * width + col]);
    }
    void set(int row, int col, Chamber c) {
        classes[static_cast<std::size_t>(row) * width + col] = static_cast<std::uint8_t>(c);
    }

    BinaryMask mask_of(Chamber c) const;
    void paint(const BinaryMask& m, Chamber c);
    std::vector<Chamber> present_chambers() const;

    static LabelMap zeros(int width, int height, double spacing_mm) {
        if (width <= 0 || height <= 0) throw std::invalid_argument("labelmap: non-positive dimensions");
        if (spacing_mm <= 0.0) throw std::invalid_argument("labelmap: non-positive spacing");
        LabelMap m;
        m.width = width;
        m.height = height;
        m.spacing_mm = spacing_mm;
        m.classes.assign(static_cast<std::size_t>(width) * height, 0);
        return m;
    }
};

}  // namespace echoseg
