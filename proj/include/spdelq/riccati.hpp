#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "spdelq/lyapunov.hpp"
#include "spdelq/operator_path.hpp"
#include "spdelq/spectral.hpp"

namespace spdelq {

using MatrixFn = std::function<Matrix(double)>;
using ChannelFn = std::function<std::vector<Matrix>(double)>;

/// LQ instance: state generator and noise channels from the basis, control operator B,
/// control-noise operators D_j, weights Q, R, G.
struct RiccatiProblem {
    SpectralBasis basis;
    int control_dim = 1;
    /// M x m
    MatrixFn B;
    /// One M x m matrix per noise channel (missing trailing channels count as zero);
    /// an empty function means D = 0.
    ChannelFn D;
    MatrixFn Q;
    MatrixFn R;
    SymOperator G;
    double delta = 1e-8;
    double alpha = 0.25;
    double horizon = 1.0;
    bool time_invariant = true;
    /// sum_{j>N} |D_j|^2 for the channels dropped by the truncation, and the admissible c.
    double tail_bound = 0.0;
    double tail_limit = std::numeric_limits<double>::infinity();

    static RiccatiProblem constant(const SpectralBasis& basis, const Matrix& B, const std::vector<Matrix>& D,
                                   const Matrix& Q, const Matrix& R, const SymOperator& G, double delta, double alpha,
                                   double horizon);

    /// Shapes, Q and G positive semidefinite, R >= delta I at t = 0, the grid nodes (when
    /// given) and t = T; throws InvalidArgument naming the failing condition.
    void validate(const GradedTimeGrid* grid = nullptr) const;

    std::vector<Matrix> control_noise(double t) const;
    RiccatiProblem with_terminal(const SymOperator& g) const;
    RiccatiProblem with_horizon(double t) const;
};

struct LambdaResult {
    SymOperator Lambda;
    /// lambda(t, P), m x M
    Matrix gain;
    /// Operator-norm factor sqrt(tail_bound |P|) bounding the dropped channels' share of
    /// B*P + sum_j D_j* P C_j.
    double tail_estimate = 0.0;
    /// B*P + sum_j D_j* P C_j
    Matrix coupling;
};

/// Lambda = R + sum_j D_j* P D_j and gain = -Lambda^{-1} (B* P + sum_j D_j* P C_j).
LambdaResult lambda_operator(const RiccatiProblem& prob, double t, const Matrix& P);

/// Feedback gains on the grid nodes with the matching Lambda values.
struct GainPath {
    GradedTimeGrid grid;
    std::vector<Matrix> gains;
    std::vector<SymOperator> lambdas;

    /// Gain of the node at or left of t; times in the last interval or beyond use the
    /// last interior node.
    const Matrix& lookup(double t) const;
};

struct RiccatiSettings {
    /// Outer stop: sup_k |P^{N+1}_k - P^N_k| <= tol max(1, sup_k |P^{N+1}_k|).
    double tol = 1e-8;
    int max_outer = 50;
    /// Eigenvalue slack for the monotonicity and positivity certificates, scaled by
    /// max(1, |P|).
    double psd_slack = 1e-9;
    bool keep_iterates = false;
    LyapunovSettings lyapunov;
};

struct RiccatiSolution {
    OperatorPath path;
    GainPath gains;
    int iterations = 0;
    /// sup distance between successive iterates, starting with |P^1 - 0|.
    std::vector<double> history;
    /// min over N >= 1 and nodes of lambda_min(P^N - P^{N+1}) / max(1, |P^N|).
    double monotonicity_worst = std::numeric_limits<double>::infinity();
    /// min over iterates and nodes of lambda_min(P^N) / max(1, |P^N|).
    double positivity_worst = std::numeric_limits<double>::infinity();
    /// Largest mismatch between the two integral forms of the equation at ten stage
    /// points, relative to (1 + |P|)^2.
    double form_residual = 0.0;
    /// P^N(0) for N = 1, 2, ...
    std::vector<SymOperator> initial_values;
    std::vector<OperatorPath> iterates;
};

/// Lyapunov data of one quasi-linearization step: drift B lambda, channels C_j + D_j lambda
/// and source Q + lambda* R lambda, all evaluated along `previous`.
LyapunovData linearized_data(const RiccatiProblem& prob, const OperatorPath& previous);

/// P^0 = 0, P^{N+1} = Lyapunov solve linearized at P^N, until the sup distance is
/// below tolerance. Throws NonConvergenceError (with the history) when max_outer is
/// reached and InternalConsistencyError if the iterates stop decreasing.
RiccatiSolution quasi_linearize(const RiccatiProblem& prob, const GradedTimeGrid& grid,
                                const RiccatiSettings& settings = {});

GainPath gain_path(const RiccatiProblem& prob, const OperatorPath& path);

/// Integrand of the first integral form: sum_j C_j* P C_j + Q - lambda* Lambda lambda.
Matrix riccati_integrand(const RiccatiProblem& prob, double t, const Matrix& P);

/// Backward adaptive Dormand-Prince integration of the differential form on a uniform grid
/// with `fine_steps` intervals. Independent check for small problems (M <= 16).
OperatorPath direct_riccati_oracle(const RiccatiProblem& prob, int fine_steps, double tol = 1e-12);

/// F(s, K, P) = (BK)* P + P BK + sum_j (C_j + D_j K)* P (C_j + D_j K) + K* R K.
Matrix completion_form(const RiccatiProblem& prob, double t, const Matrix& K, const Matrix& P);

/// max-abs of F(K) - F(lambda) - (K - lambda)* Lambda (K - lambda).
double completion_identity_check(const RiccatiProblem& prob, const Matrix& P, const Matrix& K, double t);

}  // namespace spdelq
