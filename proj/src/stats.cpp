#include "mivs/stats.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mivs/error.h"

namespace mivs::stats {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double chi2_1_upper(double stat) {
    if (!(stat > 0)) return 1.0;
    return std::erfc(std::sqrt(stat / 2.0));
}

double two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median(std::span<const double> v) { return quantile(v, 0.5); }

double quantile(std::span<const double> v, double prob) {
    if (v.empty()) throw SpecError("quantile of an empty sample");
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const double h = (static_cast<double>(s.size()) - 1.0) * prob;
    const auto lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double truncated_normal(Rng& rng, double mean, bool positive) {
    // Work with a standard normal truncated to (a, inf).
    const double a = positive ? -mean : mean;
    double z;
    if (a < 0.4) {
        do {
            z = rng.normal();
        } while (z <= a);
    } else {
        // Exponential proposal (Robert 1995).
        const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
        for (;;) {
            z = a + rng.exponential(rate);
            const double d = z - rate;
            if (rng.uniform() <= std::exp(-0.5 * d * d)) break;
        }
    }
    return positive ? mean + z : mean - z;
}

double binomial_deviance(double y, double prob) {
    const double p = std::clamp(prob, 1e-15, 1.0 - 1e-15);
    return -2.0 * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

} // namespace mivs::stats
