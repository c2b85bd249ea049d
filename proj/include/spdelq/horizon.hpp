#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "spdelq/riccati.hpp"
#include "spdelq/simulator.hpp"

namespace spdelq {

struct AreSettings {
    /// Increasing horizons T_i; consecutive values are reached by solving only the
    /// window T_{i+1} - T_i, which is exact for time-invariant data.
    std::vector<double> horizons = {1, 2, 4, 8, 16, 32, 64};
    double tol = 1e-9;
    /// Grid intervals per window.
    int intervals = 200;
    double psd_slack = 1e-9;
    /// Stationarity failure above this multiple of tol.
    double stationarity_factor = 100.0;
    RiccatiSettings riccati;
};

struct AREResult {
    SymOperator P;
    std::vector<double> horizons_used;
    /// |P^{T_{i+1}}(0) - P^{T_i}(0)|
    std::vector<double> convergence_history;
    /// P^{T_i}(0) for every horizon used.
    std::vector<SymOperator> values;
    /// |P_window(0) - P| after one unit window started from P, relative to max(1, |P|).
    double stationarity_residual = 0.0;
    /// min_i lambda_min(P^{T_{i+1}}(0) - P^{T_i}(0)) / max(1, |P|).
    double monotonicity_worst = 0.0;
};

/// Algebraic Riccati solution as the limit of finite-horizon values with G = 0.
AREResult solve_are(const RiccatiProblem& prob, const AreSettings& settings = {});

/// Feedback gain lambda(P) of a stationary solution.
Matrix are_gain(const RiccatiProblem& prob, const SymOperator& P);

struct StabilityReport {
    double decay_rate = 0.0;
    bool stable = false;
    std::string diagnostic;
    std::vector<double> times;
    std::vector<double> mean_sq;
};

/// Simulates u = K X on [0, horizon] and fits the exponential rate of E|X_t|^2 over the
/// second half of the window.
StabilityReport check_stabilizing_feedback(const RiccatiProblem& prob, const Matrix& K, const Vector& x0,
                                           double horizon, const MCConfig& mc, int intervals = 200);

/// Riccati solve with Q = I, R = I and terminal n I.
RiccatiSolution penalty_riccati(const RiccatiProblem& prob, double n, const GradedTimeGrid& grid,
                                const RiccatiSettings& settings = {});

struct NullControlSettings {
    /// Probe times T - 2^{-k} for k = 1..probe_levels (only those inside (0, T)).
    int probe_levels = 10;
    /// Verdict thresholds.
    double saturation_limit = 1.5;
    double blowup_exponent = -0.5;
    RiccatiSettings riccati;
};

struct NullControlSweep {
    std::vector<double> penalties;
    std::vector<double> probe_times;
    /// values[i][k] = <P^{n_i}(t_k) x, x>
    std::vector<std::vector<double>> values;
    std::vector<double> terminal_msq;
    /// Ratio of the last two penalties' values at the earliest probe: about 1 when P^n is
    /// bounded in n away from T, about n_last / n_prev when it grows with the penalty.
    double saturation_ratio = 0.0;
    /// Log-log slope of the largest-penalty values against T - t over the probes closest
    /// to T: about -1 for a blow-up, about 0 for a flat profile.
    double growth_exponent = 0.0;
    /// terminal_msq.back() / terminal_msq.front()
    double terminal_ratio = 0.0;
    /// "null_controllable", "not_null_controllable" or "inconclusive".
    std::string verdict;
};

NullControlSweep null_control_sweep(const RiccatiProblem& prob, const Vector& x0, const std::vector<double>& penalties,
                                    const GradedTimeGrid& grid, const MCConfig& mc,
                                    const NullControlSettings& settings = {});

/// Columns n, probe_t, value, terminal_msq.
void write_sweep_csv(std::ostream& os, const NullControlSweep& sweep);

}  // namespace spdelq
