#include "spdelq/stats.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "spdelq/errors.hpp"

namespace spdelq {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw InvalidArgument("fit_line: need at least two (x, y) pairs of equal length");
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    return f;
}

LineFit fit_loglog(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    if (lx.size() < 2) return {0.0, -std::numeric_limits<double>::infinity()};
    return fit_line(lx, ly);
}

double pairwise_sum(std::span<const double> v) {
    constexpr std::size_t kLeaf = 16;
    if (v.size() <= kLeaf) {
        double s = 0.0;
        for (double e : v) s += e;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

SampleSummary summarize(std::span<const double> v) {
    SampleSummary s;
    s.count = static_cast<long long>(v.size());
    if (v.empty()) return s;
    const double n = static_cast<double>(v.size());
    s.mean = pairwise_sum(v) / n;
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - s.mean) * (v[i] - s.mean);
    s.variance = v.size() > 1 ? pairwise_sum(dev) / (n - 1.0) : 0.0;
    s.ci_halfwidth = kZ95 * std::sqrt(s.variance / n);
    return s;
}

}  // namespace spdelq
