// Python bindings: numpy-facing wrappers over phantom generation, weak
// labeling, the per-view refinement pipeline and the measurement/statistics
// helpers. Arrays are row-major (row 0 = top), frames float32 in [0, 1],
// label maps uint8 with the Chamber codes 0..5.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "echoseg/measure.hpp"
#include "echoseg/phantom.hpp"
#include "echoseg/pipeline.hpp"
#include "echoseg/refiner.hpp"
#include "echoseg/stats.hpp"

namespace py = pybind11;
using namespace echoseg;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using Sector = std::tuple<double, double, double, double>;  // apex_row, apex_col, angle, depth

View parse_view(const std::string& name) {
    const auto view = view_from_name(name);
    if (!view) throw std::invalid_argument("unknown view \"" + name + "\"");
    return *view;
}

SectorGeometry sector_from(const std::optional<Sector>& s, int width, int height) {
    if (s) return {std::get<0>(*s), std::get<1>(*s), std::get<2>(*s), std::get<3>(*s)};
    // Default: a fan wide and deep enough to cover the whole frame.
    return {-10.0 * height, width / 2.0, 120.0, 100.0 * height};
}

Raster raster_from(const FloatArray& arr, double spacing_mm, const std::optional<Sector>& sector) {
    if (arr.ndim() != 2) throw std::invalid_argument("frame must be a 2-D array");
    const int height = static_cast<int>(arr.shape(0));
    const int width = static_cast<int>(arr.shape(1));
    Raster img = Raster::zeros(width, height, spacing_mm, sector_from(sector, width, height));
    std::memcpy(img.pixels.data(), arr.data(), sizeof(float) * img.pixels.size());
    return img;
}

py::array_t<float> raster_to(const Raster& img) {
    py::array_t<float> arr({img.height, img.width});
    std::memcpy(arr.mutable_data(), img.pixels.data(), sizeof(float) * img.pixels.size());
    return arr;
}

LabelMap labelmap_from(const ByteArray& arr, double spacing_mm) {
    if (arr.ndim() != 2) throw std::invalid_argument("label map must be a 2-D array");
    LabelMap label = LabelMap::zeros(static_cast<int>(arr.shape(1)),
                                     static_cast<int>(arr.shape(0)), spacing_mm);
    const auto* data = arr.data();
    for (std::size_t i = 0; i < label.classes.size(); ++i) {
        if (data[i] > static_cast<std::uint8_t>(Chamber::LVMyo))
            throw std::invalid_argument("label map values must lie in 0..5");
        label.classes[i] = data[i];
    }
    return label;
}

py::array_t<std::uint8_t> labelmap_to(const LabelMap& label) {
    py::array_t<std::uint8_t> arr({label.height, label.width});
    std::memcpy(arr.mutable_data(), label.classes.data(), label.classes.size());
    return arr;
}

BinaryMask mask_from(const ByteArray& arr, double spacing_mm) {
    if (arr.ndim() != 2) throw std::invalid_argument("mask must be a 2-D array");
    BinaryMask mask = BinaryMask::zeros(static_cast<int>(arr.shape(1)),
                                        static_cast<int>(arr.shape(0)), spacing_mm);
    const auto* data = arr.data();
    for (std::size_t i = 0; i < mask.bits.size(); ++i) mask.bits[i] = data[i] ? 1 : 0;
    return mask;
}

py::dict measurements_to(const MeasurementSet& set) {
    py::dict values;
    for (const auto& [k, v] : set.values) values[py::str(k)] = v;
    py::dict out;
    out["values"] = values;
    out["warnings"] = set.warnings;
    return out;
}

py::dict generate_phantom(const std::string& view, double scale, double contract_scale,
                          int frames_per_cycle, double speckle, std::uint64_t seed) {
    StudyPhantomParams params;
    params.scale = scale;
    params.contract_scale = contract_scale;
    params.frames_per_cycle = frames_per_cycle;
    params.speckle = speckle;
    params.seed = seed;
    const PhantomSpec spec = make_view_spec(parse_view(view), params);
    const PhantomOutput out = generate(spec);

    py::list frames, truth;
    for (const auto& f : out.frames) frames.append(raster_to(f));
    for (const auto& t : out.truth) truth.append(labelmap_to(t));
    py::dict result;
    result["frames"] = frames;
    result["truth"] = truth;
    result["spacing_mm"] = spec.spacing_mm;
    result["sector"] = Sector{spec.sector.apex_row, spec.sector.apex_col,
                              spec.sector.opening_angle_deg, spec.sector.depth_px};
    result["measurements"] = measurements_to(out.analytic);
    return result;
}

py::object initial_label_py(const std::string& view, const FloatArray& frame, double spacing_mm,
                            const std::optional<Sector>& sector, std::uint64_t seed) {
    const View v = parse_view(view);
    if (v == View::a4c)
        throw std::invalid_argument("a4c weak labels need a fitted a2c refiner; use run_pipeline");
    PipelineConfig cfg;
    cfg.seed = seed;
    const auto label = initial_label(v, raster_from(frame, spacing_mm, sector), cfg);
    if (!label) return py::none();
    return labelmap_to(*label);
}

py::dict run_pipeline_py(const std::string& view, const py::list& frames, double spacing_mm,
                         const std::optional<Sector>& sector, std::uint64_t seed) {
    const View v = parse_view(view);
    if (v == View::a4c)
        throw std::invalid_argument(
            "the a4c pipeline needs a fitted a2c refiner; run the a2c and a4c views together "
            "through the command line instead");
    PipelineConfig cfg;
    cfg.seed = seed;
    std::vector<PipelineFrame> input;
    for (std::size_t i = 0; i < frames.size(); ++i)
        input.push_back({"f" + std::to_string(i),
                         raster_from(frames[i].cast<FloatArray>(), spacing_mm, sector)});
    const ViewResult res = run_view_pipeline(v, input, cfg);

    py::dict labels;
    for (const auto& [id, label] : res.labels) labels[py::str(id)] = labelmap_to(label);
    py::list audits;
    for (const auto& a : res.audits) {
        py::dict d;
        d["step"] = a.step;
        d["labels_before"] = a.labels_before;
        d["labels_after"] = a.labels_after;
        d["replaced"] = a.replaced;
        d["recruited"] = a.recruited;
        d["rejected"] = a.rejected;
        d["elbow"] = a.elbow ? py::cast(*a.elbow) : py::none().cast<py::object>();
        audits.append(d);
    }
    py::dict out;
    out["labels"] = labels;
    out["audits"] = audits;
    out["warnings"] = res.warnings;
    return out;
}

double dice_py(const ByteArray& a, const ByteArray& b) {
    return dice(mask_from(a, 0.5), mask_from(b, 0.5));
}

py::dict measure_label_py(const ByteArray& label, double spacing_mm, int n_disks) {
    const LabelMap map = labelmap_from(label, spacing_mm);
    py::dict out;
    for (Chamber ch : map.present_chambers()) {
        if (ch == Chamber::background || ch == Chamber::LVMyo) continue;
        const auto g = chamber_geometry(map, ch, n_disks);
        if (!g) continue;
        py::dict entry;
        entry["area_cm2"] = g->area_cm2;
        entry["length_cm"] = g->length_cm;
        entry["disk_diameters_cm"] = g->disk_diameters_cm;
        entry["volume_ml"] = single_plane_volume(*g);
        out[py::str(chamber_name(ch))] = entry;
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_echoseg, m) {
    m.doc() = "Cardiac ultrasound segmentation, phantoms and chamber measurements";
    m.attr("__version__") = "0.1.0";

    m.def("generate_phantom", &generate_phantom,
          "Render one synthetic cardiac cycle with per-frame truth labels", py::arg("view"),
          py::arg("scale") = 1.0, py::arg("contract_scale") = 1.0,
          py::arg("frames_per_cycle") = 8, py::arg("speckle") = 0.35, py::arg("seed") = 0);

    m.def("initial_label", &initial_label_py,
          "Initial weak label for one frame, or None when it is unusable", py::arg("view"),
          py::arg("frame"), py::arg("spacing_mm") = 0.5, py::arg("sector") = py::none(),
          py::arg("seed") = 0);

    m.def("run_pipeline", &run_pipeline_py,
          "Weak labels plus self-learning refinement over a set of frames", py::arg("view"),
          py::arg("frames"), py::arg("spacing_mm") = 0.5, py::arg("sector") = py::none(),
          py::arg("seed") = 0);

    m.def("measure_chambers", &measure_label_py,
          "Per-chamber area, long axis and single-plane volume from one label map",
          py::arg("label"), py::arg("spacing_mm") = 0.5, py::arg("n_disks") = 20);

    m.def("dice", &dice_py, "Overlap between two binary masks", py::arg("a"), py::arg("b"));

    m.def("bootstrap_ci", &bootstrap_ci, "Seeded bootstrap interval for a sample mean",
          py::arg("values"), py::arg("resamples") = 10000, py::arg("level") = 0.95,
          py::arg("seed") = 0);

    m.def("ejection_fraction", &ejection_fraction, py::arg("edv_ml"), py::arg("esv_ml"));

    m.def("lv_mass_area_length", &lv_mass_area_length, py::arg("epicardial_area_cm2"),
          py::arg("lumen_area_cm2"), py::arg("long_axis_cm"),
          py::arg("wall_thickness_cm") = py::none());

    m.def("index_by_bsa", &index_by_bsa, py::arg("value"), py::arg("bsa_m2"));

    m.def("elbow_index", &elbow_index, "Bend of a decreasing loss curve, or None",
          py::arg("curve"), py::arg("min_distance") = 0.05);
}
