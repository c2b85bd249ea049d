#pragma once
// Scalar stochastic Riccati equation, written in reversed time tau = T - t:
//
//   dP/dtau = (2 mu + c^2) P + q - (b + c d)^2 P^2 / (r + d^2 P),  P(0) = g.
//
// Two independent references: an adaptive stiff BDF integration and, for d = 0,
// the closed form built from the two roots of the stationary quadratic.

#include <cmath>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_odeiv2.h>

namespace oracle {

struct ScalarLq {
    double mu = 0.0;
    double b = 1.0;
    double c = 0.0;
    double d = 0.0;
    double q = 1.0;
    double r = 1.0;
    double g = 0.0;
};

inline double scalar_rhs(const ScalarLq& s, double p) {
    const double k = s.b * p + s.c * s.d * p;
    return (2.0 * s.mu + s.c * s.c) * p + s.q - k * k / (s.r + s.d * s.d * p);
}

inline double scalar_rhs_dp(const ScalarLq& s, double p) {
    const double bc = s.b + s.c * s.d;
    const double den = s.r + s.d * s.d * p;
    return 2.0 * s.mu + s.c * s.c - bc * bc * (2.0 * p * den - p * p * s.d * s.d) / (den * den);
}

/// P at distance tau before the horizon, by GSL's variable-order BDF driver.
inline double scalar_riccati_stiff(const ScalarLq& s, double tau, double tol = 1e-12) {
    auto rhs = [](double, const double y[], double dy[], void* p) -> int {
        dy[0] = scalar_rhs(*static_cast<const ScalarLq*>(p), y[0]);
        return GSL_SUCCESS;
    };
    auto jac = [](double, const double y[], double* dfdy, double dfdt[], void* p) -> int {
        dfdy[0] = scalar_rhs_dp(*static_cast<const ScalarLq*>(p), y[0]);
        dfdt[0] = 0.0;
        return GSL_SUCCESS;
    };
    ScalarLq copy = s;
    gsl_odeiv2_system sys{rhs, jac, 1, &copy};
    gsl_odeiv2_driver* d = gsl_odeiv2_driver_alloc_y_new(&sys, gsl_odeiv2_step_msbdf, tau * 1e-4, tol, tol);
    double t = 0.0;
    double y[1] = {s.g};
    const int status = gsl_odeiv2_driver_apply(d, &t, tau, y);
    gsl_odeiv2_driver_free(d);
    return status == GSL_SUCCESS ? y[0] : std::nan("");
}

/// Positive root of the stationary equation (the algebraic Riccati value), d = 0.
inline double scalar_are_root(const ScalarLq& s) {
    const double a = 2.0 * s.mu + s.c * s.c;
    const double beta = s.b * s.b / s.r;
    return (a + std::sqrt(a * a + 4.0 * beta * s.q)) / (2.0 * beta);
}

/// Closed form for d = 0 and b != 0.
inline double scalar_riccati_closed(const ScalarLq& s, double tau) {
    const double a = 2.0 * s.mu + s.c * s.c;
    const double beta = s.b * s.b / s.r;
    const double disc = std::sqrt(a * a + 4.0 * beta * s.q);
    const double hi = (a + disc) / (2.0 * beta);
    const double lo = (a - disc) / (2.0 * beta);
    const double e = std::exp(-beta * (hi - lo) * tau);
    return (hi * (s.g - lo) - lo * (s.g - hi) * e) / ((s.g - lo) - (s.g - hi) * e);
}

}  // namespace oracle
