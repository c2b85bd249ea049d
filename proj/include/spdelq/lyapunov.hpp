#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "spdelq/mc.hpp"
#include "spdelq/operator_path.hpp"
#include "spdelq/spectral.hpp"

namespace spdelq {

/// Coefficients of the backward equation at one time. Empty matrices mean zero.
struct LyapunovCoefficients {
    /// A0(t): perturbation of the generator.
    Matrix drift;
    /// Perturbed noise coefficients C^_j(t).
    std::vector<Matrix> channels;
    /// f(t), symmetric.
    Matrix source;
};

using CoefficientFn = std::function<LyapunovCoefficients(double)>;

/// Mild equation
///   P_t = e^{A*(T-t)} G e^{A(T-t)}
///       + int_t^T e^{A*(s-t)} [A0* P + P A0 + sum_j C^_j* P C^_j + f](s) e^{A(s-t)} ds.
/// The coefficients are only ever queried on [0, T).
struct LyapunovData {
    SpectralBasis basis;
    double horizon = 0.0;
    double alpha = 0.25;
    CoefficientFn coefficients;
    SymOperator terminal;
    /// c in |A0(s)| <= c (T-s)^{-alpha}; infinity disables the check.
    double drift_constant = std::numeric_limits<double>::infinity();

    /// Time-independent coefficients.
    static LyapunovData constant(const SpectralBasis& basis, double horizon, double alpha, const Matrix& drift,
                                 const std::vector<Matrix>& channels, const Matrix& source, const SymOperator& terminal);
    /// A0 = 0, C^_j = C_j of the basis.
    static LyapunovData uncontrolled(const SpectralBasis& basis, double horizon, double alpha, const Matrix& source,
                                     const SymOperator& terminal);
};

struct LyapunovSettings {
    /// Stage fixed point stops when the update is below inner_tol * max(1, |P|_max).
    double inner_tol = 1e-10;
    int inner_max = 200;
    /// An interval whose fixed point does not contract is halved, at most this often.
    int max_depth = 12;
    double overflow_guard = 1e150;
};

/// Backward sweep of three-stage Gauss collocation with exact exponential weights.
/// Returns node values plus a dense continuous extension.
OperatorPath solve_lyapunov(const LyapunovData& data, const GradedTimeGrid& grid, const LyapunovSettings& settings = {});

/// A0* P + P A0 + sum_j C^_j* P C^_j + f for given coefficients.
Matrix lyapunov_integrand(const LyapunovCoefficients& coef, const Matrix& p);

struct McEstimate {
    double estimate = 0.0;
    double ci_halfwidth = 0.0;
    long long paths = 0;
};

/// Monte-Carlo value of E[<G Y_T, Y_T> + int_t^T <f_s Y_s, Y_s> ds] for the forward
/// equation dY = (A + A0) Y ds + sum_j C^_j Y dW_j, Y_t = x, on a graded grid of
/// mc.steps intervals.
McEstimate representation_value(const LyapunovData& data, double t, const Vector& x, const MCConfig& mc);

struct SingularBound {
    double fitted_exponent = 0.0;
    double prefactor = 0.0;
    /// max_k S(t_k) (T - t_k)^{2 alpha}
    double constant = 0.0;
    std::vector<double> distances;
    std::vector<double> values;
};

/// Fits |sum_j C^_j* P_s C^_j| against T - s over the interior nodes.
SingularBound singular_sum_bound(const OperatorPath& path, const LyapunovData& data);

struct APrioriReport {
    bool passed = true;
    double worst_ratio = 0.0;
};

/// |P_t| <= C (|G| + int_t^T |f_s| ds) at every node.
APrioriReport a_priori_check(const OperatorPath& path, const LyapunovData& data, double constant = 1.0);

}  // namespace spdelq
