#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "echoseg/mask.hpp"

namespace echoseg {

// Dice overlap coefficient 2|A∩B| / (|A|+|B|). Two empty masks count as
// a perfect match (1.0). Dimension mismatch throws.
double dice(const BinaryMask& a, const BinaryMask& b);

// Spearman rank correlation with average ranks for ties. Needs n >= 3
// pairs; a constant series has no rank ordering, signaled as nullopt.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

// Coefficient of determination of the least-squares line y = a + bx.
// Undefined (nullopt) when x is constant or y has zero variance.
std::optional<double> r_squared(const std::vector<double>& x, const std::vector<double>& y);

struct BlandAltman {
    double bias = 0.0;       // mean(x - y)
    double loa_half = 0.0;   // 1.96 * sample SD of the differences
};

// Bland-Altman agreement of two paired series, n >= 2.
BlandAltman bland_altman(const std::vector<double>& x, const std::vector<double>& y);

// Cohen's kappa over two equally long categorical ratings. When chance
// agreement is exactly 1 (both raters constant and equal) kappa is
// undefined, signaled as nullopt.
std::optional<double> cohen_kappa(const std::vector<int>& a, const std::vector<int>& b);

// Percentile bootstrap confidence interval for the mean. Every resample
// draws its generator from (seed, resample index), so the result is
// independent of evaluation order. Quantiles interpolate linearly.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values, int resamples = 10000,
                                       double level = 0.95, std::uint64_t seed = 0);

struct MannWhitney {
    double u = 0.0;           // U statistic of the first sample
    double p_two_sided = 1.0; // normal approximation, tie-corrected,
                              // with 0.5 continuity correction
};

// Rank-sum test: U_x = R_x - n_x(n_x+1)/2, which equals the number of
// (x, y) pairs with x > y plus half the ties. The two-sided p-value uses
// z = (U - n_x n_y / 2 -/+ 0.5) / sigma with the tie-corrected sigma; a
// fully tied pooled sample yields p = 1.
MannWhitney mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y);

// Binary abnormality call per value: abnormal strictly beyond the cutoff
// in the configured direction (1 = abnormal).
std::vector<std::uint8_t> classify_abnormal(const std::vector<double>& values, double cutoff,
                                            bool abnormal_above);

struct BinaryAgreement {
    long tp = 0, fp = 0, fn = 0, tn = 0;  // positive = abnormal
    double accuracy = 0.0;
    std::optional<double> kappa;
};

BinaryAgreement binary_agreement(const std::vector<std::uint8_t>& pred,
                                 const std::vector<std::uint8_t>& ref);

}  // namespace echoseg
