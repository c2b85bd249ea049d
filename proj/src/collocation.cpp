#include "spdelq/collocation.hpp"

#include <cmath>

namespace spdelq::collocation {

namespace {

struct LagrangeTable {
    // coeff[m][r]: coefficient of x^r in l_m(x).
    std::array<std::array<double, kStages>, kStages> coeff{};
};

const LagrangeTable& lagrange() {
    static const LagrangeTable table = [] {
        LagrangeTable t;
        const auto& c = stage_nodes();
        for (int m = 0; m < kStages; ++m) {
            std::array<double, kStages> poly{};
            poly[0] = 1.0;
            int degree = 0;
            double denom = 1.0;
            for (int i = 0; i < kStages; ++i) {
                if (i == m) continue;
                // poly *= (x - c_i)
                for (int r = degree + 1; r > 0; --r) poly[r] = poly[r - 1] - c[i] * poly[r];
                poly[0] = -c[i] * poly[0];
                ++degree;
                denom *= c[m] - c[i];
            }
            for (int r = 0; r < kStages; ++r) t.coeff[m][r] = poly[r] / denom;
        }
        return t;
    }();
    return table;
}

}  // namespace

const std::array<double, kStages>& stage_nodes() {
    static const std::array<double, kStages> nodes = {0.5 - std::sqrt(15.0) / 10.0, 0.5,
                                                      0.5 + std::sqrt(15.0) / 10.0};
    return nodes;
}

void exponential_moments(double z, double length, std::span<double> out) {
    const double zl = z * length;
    if (std::abs(zl) <= 5.0) {
        // sum_n z^n L^{n+p+1} / (n! (n+p+1))
        for (std::size_t p = 0; p < out.size(); ++p) {
            double term = std::pow(length, static_cast<double>(p) + 1.0);  // z^n L^{n+p+1} / n!
            double sum = term / (static_cast<double>(p) + 1.0);
            for (int n = 1; n < 200; ++n) {
                term *= zl / n;
                const double add = term / (n + static_cast<double>(p) + 1.0);
                sum += add;
                if (std::abs(add) <= 1e-18 * std::abs(sum)) break;
            }
            out[p] = sum;
        }
        return;
    }
    const double ez = std::exp(zl);
    out[0] = std::expm1(zl) / z;
    double lp = 1.0;
    for (std::size_t p = 1; p < out.size(); ++p) {
        lp *= length;
        out[p] = (lp * ez - static_cast<double>(p) * out[p - 1]) / z;
    }
}

ScalarWeights scalar_weights(double rate, double h, double c) {
    ScalarWeights w;
    const double len = 1.0 - c;
    w.transport = std::exp(rate * h * len);
    std::array<double, kStages> moments{};
    exponential_moments(rate * h, len, moments);
    const auto& lag = lagrange();
    for (int m = 0; m < kStages; ++m) {
        // Taylor-shift l_m to the point c: l_m(c + y) = sum_p beta_p y^p.
        std::array<double, kStages> beta{};
        for (int r = 0; r < kStages; ++r) {
            double binom = 1.0;  // C(r, p)
            for (int p = 0; p <= r; ++p) {
                beta[p] += lag.coeff[m][r] * binom * std::pow(c, r - p);
                binom = binom * (r - p) / (p + 1);
            }
        }
        double s = 0.0;
        for (int p = 0; p < kStages; ++p) s += beta[p] * moments[p];
        w.source[m] = h * s;
    }
    return w;
}

PointWeights point_weights(std::span<const double> eigenvalues, double h, double c) {
    const auto n = static_cast<Eigen::Index>(eigenvalues.size());
    PointWeights pw;
    pw.transport.resize(n, n);
    for (auto& s : pw.source) s.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = k; l < n; ++l) {
            const double rate = eigenvalues[static_cast<std::size_t>(k)] + eigenvalues[static_cast<std::size_t>(l)];
            const ScalarWeights w = scalar_weights(rate, h, c);
            pw.transport(k, l) = pw.transport(l, k) = w.transport;
            for (int m = 0; m < kStages; ++m) pw.source[m](k, l) = pw.source[m](l, k) = w.source[m];
        }
    }
    return pw;
}

IntervalWeights interval_weights(std::span<const double> eigenvalues, double h) {
    IntervalWeights iw;
    iw.at[0] = point_weights(eigenvalues, h, 0.0);
    for (int i = 0; i < kStages; ++i) iw.at[i + 1] = point_weights(eigenvalues, h, stage_nodes()[i]);
    return iw;
}

Matrix apply(const PointWeights& w, const Matrix& right, std::span<const Matrix> sources) {
    Matrix out = w.transport.cwiseProduct(right);
    for (int m = 0; m < kStages; ++m) out += w.source[m].cwiseProduct(sources[m]);
    return out;
}

}  // namespace spdelq::collocation
