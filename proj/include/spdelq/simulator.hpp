#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <vector>

#include "spdelq/kernels.hpp"
#include "spdelq/lyapunov.hpp"
#include "spdelq/mc.hpp"
#include "spdelq/riccati.hpp"

namespace spdelq {

/// u_t = K(t) X_t + v(t). Open-loop policies have K = 0, feedback policies v = 0.
struct ControlPolicy {
    enum class Kind { open_loop, feedback, affine };

    Kind kind = Kind::open_loop;
    int control_dim = 0;
    std::function<Matrix(double)> gain;
    std::function<Vector(double)> offset;

    static ControlPolicy zero(int control_dim);
    static ControlPolicy open_loop(int control_dim, std::function<Vector(double)> offset);
    /// Gains from `gains` (left-node lookup) plus a constant perturbation, if given.
    static ControlPolicy feedback(const GainPath& gains, const Matrix& perturbation = Matrix());
    static ControlPolicy constant_feedback(const Matrix& gain);
    static ControlPolicy affine(const GainPath& gains, std::function<Vector(double)> offset,
                                const Matrix& perturbation = Matrix());

    /// m x M (zero when there is no feedback part).
    Matrix gain_at(double t, int state_dim) const;
    Vector offset_at(double t) const;
};

/// Extra integrand recorded along the paths, as a function of time.
using TermFn = std::function<kernels::QuadraticTerm(double)>;

struct SimulationOptions {
    std::vector<TermFn> extra_terms;
    bool use_serial_reference = false;
};

/// Simulated paths with the per-path integrals needed by the cost functional.
struct Ensemble {
    static constexpr int kStateCost = 0;
    static constexpr int kControlCost = 1;
    static constexpr int kControlEnergy = 2;
    static constexpr int kBuiltinTerms = 3;

    kernels::EnsembleData data;
    int state_dim = 0;
    int control_dim = 0;
    /// Index of each grid node among the simulation time points.
    std::vector<int> node_index;

    long long paths() const noexcept { return data.paths; }
    /// Per-path integral of an extra term (0-based among the extras).
    const std::vector<double>& extra(int i) const {
        return data.integrals.at(static_cast<std::size_t>(kBuiltinTerms + i));
    }
    /// terminal + state + control cost per path.
    std::vector<double> path_costs() const;
};

/// Exponential Euler on the mild form over the grid nodes refined by mc.steps substeps.
Ensemble simulate_paths(const RiccatiProblem& prob, const GradedTimeGrid& grid, const Vector& x0,
                        const ControlPolicy& policy, const MCConfig& mc, const SimulationOptions& options = {});

struct CostReport {
    double estimate = 0.0;
    double ci_halfwidth = 0.0;
    double terminal_term = 0.0;
    double running_state_term = 0.0;
    double running_control_term = 0.0;
    long long paths_used = 0;
};

CostReport estimate_cost(const RiccatiProblem& prob, const Ensemble& ensemble, const ControlPolicy& policy);

struct ValueIdentityReport {
    /// J(x0, u) - <P_0 x0, x0>
    double lhs = 0.0;
    /// E int <Lambda (u - lambda X), u - lambda X> ds
    double rhs = 0.0;
    double gap = 0.0;
    double ci_lhs = 0.0;
    double ci_rhs = 0.0;
    /// Half-width of the paired difference lhs - rhs.
    double ci_combined = 0.0;
    double allowance = 0.0;
    double value = 0.0;
    CostReport cost;
    bool passed = false;
    /// Per-path realized cost, for paired comparisons across policies.
    std::vector<double> path_costs;
};

struct ValueIdentitySettings {
    /// Discretization allowance relative to <P_0 x0, x0>.
    double allowance_rel = 5e-3;
    double ci_multiplier = 3.0;
};

/// Pathwise check of J(x0, u) = <P_0 x0, x0> + E int <Lambda (u - lambda X), u - lambda X> ds,
/// with lambda(s, P_s) taken from the dense Riccati path at every simulation time.
ValueIdentityReport verify_value_identity(const RiccatiProblem& prob, const RiccatiSolution& solution,
                                          const Vector& x0, const ControlPolicy& policy, const MCConfig& mc,
                                          const ValueIdentitySettings& settings = {});

struct PicardReport {
    /// sup_k E|Y^{n+1}(s_k) - Y^n(s_k)|^2 for n = 0, 1, ...
    std::vector<double> distances;
    /// Set when the distances grew three times in a row.
    bool non_contraction = false;
};

/// Picard iterates Y^0 = 0, Y^{n+1} = mild map of Y^n on a common noise realization, on a
/// graded grid of mc.steps intervals over [t, T].
PicardReport picard_forward(const LyapunovData& data, double t, const Vector& x, int iterations, const MCConfig& mc);

/// sup_k E|X(s_k)|^2 / (|x0|^2 + E int |u|^2), the constant of the mean-square bound.
double moment_bound_constant(const Ensemble& ensemble, const Vector& x0);

/// Per-time mean and variance of |X|^2.
void write_moment_csv(std::ostream& os, const Ensemble& ensemble);
/// Cost decomposition as a one-row CSV.
void write_cost_csv(std::ostream& os, const CostReport& cost);
/// "LQSP", uint32 version, uint32 M, uint64 paths, uint64 time points, then float64
/// states in [path][time][mode] order (native byte order). Requires stored states.
void write_binary_dump(std::ostream& os, const Ensemble& ensemble);

}  // namespace spdelq
