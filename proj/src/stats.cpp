#include "echoseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "echoseg/common.hpp"

namespace echoseg {

double dice(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("dice: mask dimensions mismatch");
    std::size_t inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        bool pa = a.bits[i] != 0, pb = b.bits[i] != 0;
        inter += pa && pb;
        na += pa;
        nb += pb;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

namespace {

// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(const std::vector<double>& v) {
    std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

void check_paired(const std::vector<double>& x, const std::vector<double>& y, std::size_t min_n,
                  const char* who) {
    if (x.size() != y.size()) throw std::invalid_argument(std::string(who) + ": length mismatch");
    if (x.size() < min_n) throw std::invalid_argument(std::string(who) + ": insufficient data");
}

}  // namespace

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    check_paired(x, y, 3, "spearman");
    return pearson(average_ranks(x), average_ranks(y));
}

std::optional<double> r_squared(const std::vector<double>& x, const std::vector<double>& y) {
    check_paired(x, y, 3, "r_squared");
    auto r = pearson(x, y);
    if (!r) return std::nullopt;
    return *r * *r;
}

BlandAltman bland_altman(const std::vector<double>& x, const std::vector<double>& y) {
    check_paired(x, y, 2, "bland_altman");
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
    BlandAltman out;
    out.bias = mean_of(d);
    out.loa_half = 1.96 * sample_stddev(d);
    return out;
}

std::optional<double> cohen_kappa(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cohen_kappa: length mismatch");
    if (a.empty()) throw std::invalid_argument("cohen_kappa: empty input");
    double n = static_cast<double>(a.size());
    std::map<int, double> ca, cb;
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
        agree += a[i] == b[i];
    }
    double po = agree / n;
    double pe = 0.0;
    for (const auto& [cat, cnt] : ca) {
        auto it = cb.find(cat);
        if (it != cb.end()) pe += (cnt / n) * (it->second / n);
    }
    if (pe >= 1.0) return std::nullopt;
    return (po - pe) / (1.0 - pe);
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& values, int resamples,
                                       double level, std::uint64_t seed) {
    if (values.size() < 2) throw std::invalid_argument("bootstrap_ci: need at least 2 values");
    if (resamples < 1) throw std::invalid_argument("bootstrap_ci: resamples must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_ci: level outside (0,1)");

    std::size_t n = values.size();
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (int i = 0; i < resamples; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += values[rng.uniform_index(n)];
        means[static_cast<std::size_t>(i)] = acc / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    auto quantile = [&](double q) {
        double pos = q * static_cast<double>(means.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        std::size_t hi = std::min(lo + 1, means.size() - 1);
        double frac = pos - static_cast<double>(lo);
        return means[lo] * (1.0 - frac) + means[hi] * frac;
    };
    double alpha = (1.0 - level) / 2.0;
    return {quantile(alpha), quantile(1.0 - alpha)};
}

MannWhitney mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty() || y.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
    std::size_t nx = x.size(), ny = y.size();
    std::vector<double> pooled(x);
    pooled.insert(pooled.end(), y.begin(), y.end());
    std::vector<double> ranks = average_ranks(pooled);

    double rx = 0.0;
    for (std::size_t i = 0; i < nx; ++i) rx += ranks[i];
    double u = rx - static_cast<double>(nx) * (nx + 1) / 2.0;

    // Tie-corrected variance of U.
    std::map<double, double> tie_counts;
    for (double v : pooled) tie_counts[v] += 1.0;
    double n = static_cast<double>(nx + ny);
    double tie_sum = 0.0;
    for (const auto& [v, t] : tie_counts) tie_sum += t * t * t - t;
    double mu = static_cast<double>(nx) * ny / 2.0;
    double var = static_cast<double>(nx) * ny / 12.0 *
                 ((n + 1.0) - tie_sum / (n * (n - 1.0)));

    MannWhitney out;
    out.u = u;
    if (var <= 0.0) {
        out.p_two_sided = 1.0;
        return out;
    }
    double diff = u - mu;
    double cc = diff > 0.0 ? -0.5 : (diff < 0.0 ? 0.5 : 0.0);
    double z = (diff + cc) / std::sqrt(var);
    out.p_two_sided = std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
    return out;
}

std::vector<std::uint8_t> classify_abnormal(const std::vector<double>& values, double cutoff,
                                            bool abnormal_above) {
    std::vector<std::uint8_t> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = (abnormal_above ? values[i] > cutoff : values[i] < cutoff) ? 1 : 0;
    return out;
}

BinaryAgreement binary_agreement(const std::vector<std::uint8_t>& pred,
                                 const std::vector<std::uint8_t>& ref) {
    if (pred.size() != ref.size()) throw std::invalid_argument("binary_agreement: length mismatch");
    if (pred.empty()) throw std::invalid_argument("binary_agreement: empty input");
    BinaryAgreement out;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        bool p = pred[i] != 0, r = ref[i] != 0;
        out.tp += p && r;
        out.fp += p && !r;
        out.fn += !p && r;
        out.tn += !p && !r;
    }
    double n = static_cast<double>(pred.size());
    out.accuracy = static_cast<double>(out.tp + out.tn) / n;
    std::vector<int> a(pred.begin(), pred.end()), b(ref.begin(), ref.end());
    out.kappa = cohen_kappa(a, b);
    return out;
}

}  // namespace echoseg
