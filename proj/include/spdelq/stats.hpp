#pragma once

#include <span>

namespace spdelq {

/// Least-squares line y = slope * x + intercept.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Fit of log(y) against log(x), skipping pairs with non-positive entries.
/// Returns slope 0 and intercept -inf when fewer than two usable pairs exist.
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

/// Pairwise (cascade) summation: result depends only on the input order.
double pairwise_sum(std::span<const double> v);

struct SampleSummary {
    double mean = 0.0;
    double variance = 0.0;
    /// 95% normal-approximation confidence half-width of the mean.
    double ci_halfwidth = 0.0;
    long long count = 0;
};

SampleSummary summarize(std::span<const double> v);

inline constexpr double kZ95 = 1.959963984540054;

}  // namespace spdelq
