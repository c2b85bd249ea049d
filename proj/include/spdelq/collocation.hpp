#pragma once

#include <array>
#include <span>
#include <vector>

#include "spdelq/sym_operator.hpp"

namespace spdelq::collocation {

// Backward steps of the mild equation
//   P(tau) = e^{A*(b-tau)} P(b) e^{A(b-tau)} + int_tau^b e^{A*(s-tau)} g(s) e^{A(s-tau)} ds
// interpolate g by its values at the Gauss-Legendre points of [a, b]. With A diagonal,
// the sandwich acts entrywise with rate mu_k + mu_l, so each step reduces to Hadamard
// products with the weight matrices below.

inline constexpr int kStages = 3;

/// Gauss-Legendre nodes on (0, 1).
const std::array<double, kStages>& stage_nodes();

/// J_p(z, L) = int_0^L e^{z y} y^p dy for p = 0 .. out.size()-1.
void exponential_moments(double z, double length, std::span<double> out);

/// Weights w_m = int_c^1 e^{rate h (x - c)} l_m(x) h dx for the Lagrange basis l_m on the
/// stage nodes, together with the transport factor e^{rate h (1 - c)}.
struct ScalarWeights {
    double transport = 1.0;
    std::array<double, kStages> source{};
};
ScalarWeights scalar_weights(double rate, double h, double c);

/// Entrywise weight matrices for evaluating the step at relative position c in [0, 1].
struct PointWeights {
    Matrix transport;
    std::array<Matrix, kStages> source;
};
PointWeights point_weights(std::span<const double> eigenvalues, double h, double c);

/// Weights at the left node (index 0) and at the stages (1..kStages) of one interval.
struct IntervalWeights {
    std::array<PointWeights, kStages + 1> at;
};
IntervalWeights interval_weights(std::span<const double> eigenvalues, double h);

/// Evaluates transport .* right + sum_m source_m .* g_m.
Matrix apply(const PointWeights& w, const Matrix& right, std::span<const Matrix> sources);

}  // namespace spdelq::collocation
