#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace echoseg {

// Thrown when an input file or manifest is malformed or inconsistent.
// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a processing stage cannot produce a usable result at all
// (e.g. a refiner asked to fit with zero training pairs). The CLI maps
// this to exit code 3. Per-frame recoverable conditions use std::optional
// instead.
struct PipelineError : std::runtime_error {
    explicit PipelineError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a geometric operation receives a mask too small or too thin
// to act on (empty ventricle, hull under 9 pixels, lumen vanishing under
// erosion). The pipeline catches this per frame and keeps the previous
// label; genuine contract violations use plain std::invalid_argument.
struct DegenerateInput : std::invalid_argument {
    explicit DegenerateInput(const std::string& msg) : std::invalid_argument(msg) {}
};

// Integer pixel coordinate, row-major convention (row 0 = top).
struct Point {
    int row = 0;
    int col = 0;

    bool operator==(const Point& o) const { return row == o.row && col == o.col; }
    bool operator!=(const Point& o) const { return !(*this == o); }
    bool operator<(const Point& o) const {
        return row != o.row ? row < o.row : col < o.col;
    }
};

// splitmix64 step. Small, fast and statistically solid enough for the
// uses here (speckle synthesis, bootstrap resampling, parameter draws),
// and trivially reproducible across platforms, unlike the distributions
// in <random> whose outputs are implementation defined.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and a stream tag.
// Used to give every frame / resample its own deterministic generator so
// results do not depend on processing order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t s = base ^ (0x6a09e667f3bcc909ULL + tag * 0x9e3779b97f4a7c15ULL);
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

// Deterministic RNG with explicitly specified sampling algorithms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [lo, hi], both inclusive. Unbiased via rejection.
    int uniform_int(int lo, int hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
        std::uint64_t range = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return lo + static_cast<int>(v % range);
    }

    // Uniform index in [0, n).
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: empty range");
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return static_cast<std::size_t>(v % n);
    }

    // Rayleigh deviate with scale sigma (mode), via inverse transform.
    double rayleigh(double sigma) {
        double u = uniform();
        // Guard against log(0); uniform() < 1 by construction.
        return sigma * std::sqrt(-2.0 * std::log1p(-u));
    }

private:
    std::uint64_t state_;
};

// Percentile with linear interpolation between order statistics
// (the numpy "linear" convention). p in [0, 100]. Sorts a copy.
double percentile(std::vector<float> values, double p);

// Mean and (n-1)-denominator standard deviation helpers used by stats
// and tests alike.
double mean_of(const std::vector<double>& v);
double sample_stddev(const std::vector<double>& v);

}  // namespace echoseg
