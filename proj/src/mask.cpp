#include "echoseg/mask.hpp"

#include <algorithm>

namespace echoseg {

const char* chamber_name(Chamber c) {
    switch (c) {
        case Chamber::background: return "background";
        case Chamber::LV: return "lv";
        case Chamber::LA: return "la";
        case Chamber::RV: return "rv";
        case Chamber::RA: return "ra";
        case Chamber::LVMyo: return "lv_myo";
    }
    return "unknown";
}

BinaryMask LabelMap::mask_of(Chamber c) const {
    BinaryMask m = BinaryMask::zeros(width, height, spacing_mm);
    for (std::size_t i = 0; i < classes.size(); ++i)
        m.bits[i] = classes[i] == static_cast<std::uint8_t>(c) ? 1 : 0;
    return m;
}

void LabelMap::paint(const BinaryMask& m, Chamber c) {
    if (m.width != width || m.height != height)
        throw std::invalid_argument("labelmap: mask dimensions mismatch");
    for (std::size_t i = 0; i < classes.size(); ++i)
        if (m.bits[i]) classes[i] = static_cast<std::uint8_t>(c);
}

std::vector<Chamber> LabelMap::present_chambers() const {
    bool seen[6] = {};
    for (auto v : classes)
        if (v < 6) seen[v] = true;
    std::vector<Chamber> out;
    for (int i = 1; i < 6; ++i)
        if (seen[i]) out.push_back(static_cast<Chamber>(i));
    return out;
}

}  // namespace echoseg
