#pragma once
// Independent check of the sine-basis multipliers: integrates the product of three
// normalized sines on [0, 1] with adaptive Gauss-Kronrod quadrature.

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

inline double sine_triple_integral(int j, int k, int l) {
    const double pi = std::numbers::pi;
    auto f = [&](double x) {
        const double s = std::numbers::sqrt2;
        return s * std::sin(j * pi * x) * s * std::sin(k * pi * x) * s * std::sin(l * pi * x);
    };
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-14, &err);
}

}  // namespace oracle
