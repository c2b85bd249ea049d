#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "spdelq/sym_operator.hpp"

namespace spdelq::kernels {

/// sum_j C_j^T P C_j. Every channel is formed into its own buffer and the buffers are
/// added in channel order, so both variants return bit-identical results.
Matrix channel_sum(std::span<const Matrix> channels, const Matrix& p);
Matrix channel_sum_serial(std::span<const Matrix> channels, const Matrix& p);

/// One substep of a linear SDE in mild exponential-Euler form:
///   X <- decay .* ( drift X + shift + sum_j (C_j X + c_j) dW_j ),  dW_j ~ N(0, dt).
/// `channels` stacks C_1..C_N vertically; `channel_shift` stacks c_1..c_N.
struct StepData {
    double dt = 0.0;
    Matrix drift;
    Vector shift;
    Matrix channels;
    Vector channel_shift;
    Vector decay;
};

/// y^T W y with y = kx X + ku u. Empty kx or ku means that block is absent.
struct QuadraticTerm {
    Matrix kx;
    Matrix ku;
    Matrix weight;
};

/// Data attached to one time point: control law u = feedback X + offset and the
/// integrands recorded there. A `singular` point is excluded from the trapezoid rule
/// and the adjacent interval falls back to its other endpoint.
struct ObservationData {
    Matrix feedback;
    Vector offset;
    std::vector<QuadraticTerm> terms;
    bool singular = false;
};

struct EnsembleSpec {
    int dim = 0;
    int control_dim = 0;
    int noise = 0;
    long long paths = 0;
    std::uint64_t seed = 0;
    Vector x0;
    /// Time points s_0 < ... < s_S; step k moves from s_k to s_{k+1}.
    std::vector<double> times;
    std::function<StepData(int)> step;
    std::function<ObservationData(int)> observe;
    int term_count = 0;
    /// Terminal weight for <W X_S, X_S>; empty means none.
    Matrix terminal_weight;
    bool store_states = false;
    /// |X|^2 above this aborts with an instability error.
    double overflow_guard = 1e150;
};

struct EnsembleData {
    long long paths = 0;
    int dim = 0;
    std::vector<double> times;
    /// integrals[term][path], trapezoid rule over the time points.
    std::vector<std::vector<double>> integrals;
    /// terminal[path] = <W X_S, X_S>.
    std::vector<double> terminal;
    /// Per time point and block: sums of |X|^2 and |X|^4 over the block's paths.
    std::vector<std::vector<double>> block_sq;
    std::vector<std::vector<double>> block_quartic;
    /// dim x paths.
    Matrix final_state;
    /// Optional states[(path * times + k) * dim + i].
    std::vector<double> states;

    /// Path mean of |X(s_k)|^2 (block sums combined pairwise).
    double mean_sq_norm(int k) const;
    /// Sample variance of |X(s_k)|^2.
    double var_sq_norm(int k) const;
};

/// Paths are processed in fixed blocks of this size regardless of the thread count.
inline constexpr int kBlock = 32;

/// Blocked, OpenMP-parallel engine.
EnsembleData run_ensemble(const EnsembleSpec& spec);
/// Path-by-path reference with matrix-vector products; agrees with run_ensemble to
/// rounding.
EnsembleData run_ensemble_serial(const EnsembleSpec& spec);

}  // namespace spdelq::kernels
