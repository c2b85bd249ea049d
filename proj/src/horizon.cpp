#include "spdelq/horizon.hpp"

#include <algorithm>
#include <cmath>

#include "spdelq/csv.hpp"
#include "spdelq/errors.hpp"
#include "spdelq/stats.hpp"

namespace spdelq {

AREResult solve_are(const RiccatiProblem& prob, const AreSettings& settings) {
    if (!prob.time_invariant) throw InvalidArgument("the algebraic equation needs time-invariant coefficients");
    const auto& hs = settings.horizons;
    if (hs.empty()) throw InvalidArgument("empty horizon schedule");
    for (std::size_t i = 0; i < hs.size(); ++i)
        if (!(hs[i] > 0.0) || (i > 0 && !(hs[i] > hs[i - 1])))
            throw InvalidArgument("horizon schedule must be positive and increasing");
    const Matrix Q = prob.Q(0.0);
    if (Q.rows() != prob.basis.modes() || !(min_eigenvalue(symmetrize(Q)) > 0.0))
        throw InvalidArgument("Q must be positive definite for the algebraic equation");
    if (!(settings.tol > 0.0)) throw InvalidArgument("tolerance must be positive");

    RiccatiSettings rs = settings.riccati;
    rs.tol = std::min(rs.tol, 0.1 * settings.tol);
    const int M = prob.basis.modes();

    AREResult r;
    r.monotonicity_worst = std::numeric_limits<double>::infinity();
    SymOperator current = SymOperator::zero(M);
    double covered = 0.0;
    bool converged = false;
    for (double T : hs) {
        const double window = T - covered;
        const RiccatiProblem w = prob.with_horizon(window).with_terminal(current);
        const auto sol = quasi_linearize(w, graded_grid(window, settings.intervals, 0.0), rs);
        const SymOperator next = sol.path.front();
        r.horizons_used.push_back(T);
        r.values.push_back(next);
        if (covered > 0.0) {
            const Matrix diff = next.matrix() - current.matrix();
            const double scale = std::max(1.0, next.norm());
            r.monotonicity_worst = std::min(r.monotonicity_worst, min_eigenvalue(symmetrize(diff)) / scale);
            if (r.monotonicity_worst < -settings.psd_slack)
                throw InternalConsistencyError("finite-horizon values decreased between horizons " +
                                               std::to_string(covered) + " and " + std::to_string(T));
            const double d = spectral_norm(diff);
            r.convergence_history.push_back(d);
            current = next;
            covered = T;
            if (d <= settings.tol * scale) {
                converged = true;
                break;
            }
        } else {
            current = next;
            covered = T;
        }
    }
    if (!converged)
        throw NonConvergenceError("horizon schedule exhausted before the values settled; the system may not be "
                                  "stabilizable",
                                  r.convergence_history);
    r.P = current;
    const RiccatiProblem unit = prob.with_horizon(1.0).with_terminal(current);
    const auto check = quasi_linearize(unit, graded_grid(1.0, settings.intervals, 0.0), rs);
    r.stationarity_residual =
        spectral_norm(check.path.front().matrix() - current.matrix()) / std::max(1.0, current.norm());
    if (r.stationarity_residual > settings.stationarity_factor * settings.tol)
        throw InternalConsistencyError("stationarity residual " + std::to_string(r.stationarity_residual) +
                                       " exceeds " + std::to_string(settings.stationarity_factor) + " * tol");
    return r;
}

Matrix are_gain(const RiccatiProblem& prob, const SymOperator& P) { return lambda_operator(prob, 0.0, P.matrix()).gain; }

StabilityReport check_stabilizing_feedback(const RiccatiProblem& prob, const Matrix& K, const Vector& x0,
                                           double horizon, const MCConfig& mc, int intervals) {
    if (!prob.time_invariant) throw InvalidArgument("stabilizability check needs time-invariant coefficients");
    if (K.rows() != prob.control_dim || K.cols() != prob.basis.modes()) throw InvalidArgument("gain has wrong shape");
    StabilityReport r;
    if (x0.squaredNorm() == 0.0) {
        r.stable = true;
        r.diagnostic = "zero initial state stays at zero";
        return r;
    }
    const RiccatiProblem p = prob.with_horizon(horizon);
    const GradedTimeGrid grid = graded_grid(horizon, intervals, 0.0);
    Ensemble ens;
    try {
        ens = simulate_paths(p, grid, x0, ControlPolicy::constant_feedback(K), mc);
    } catch (const InstabilityError& e) {
        r.stable = false;
        r.decay_rate = std::numeric_limits<double>::infinity();
        r.diagnostic = e.what();
        return r;
    }
    for (int idx : ens.node_index) {
        r.times.push_back(ens.data.times[static_cast<std::size_t>(idx)]);
        r.mean_sq.push_back(ens.data.mean_sq_norm(idx));
    }
    std::vector<double> t2, y2;
    double integral = 0.0;
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        if (k > 0) integral += 0.5 * (r.times[k] - r.times[k - 1]) * (r.mean_sq[k] + r.mean_sq[k - 1]);
        if (2 * k >= r.times.size() && r.mean_sq[k] > 0.0) {
            t2.push_back(r.times[k]);
            y2.push_back(std::log(r.mean_sq[k]));
        }
    }
    if (t2.size() < 2) {
        r.stable = true;
        r.decay_rate = -std::numeric_limits<double>::infinity();
        r.diagnostic = "state vanished";
        return r;
    }
    r.decay_rate = fit_line(t2, y2).slope;
    r.stable = std::isfinite(integral) && r.decay_rate < 0.0;
    r.diagnostic = r.stable ? "mean-square decay" : "no mean-square decay on the window";
    return r;
}

RiccatiSolution penalty_riccati(const RiccatiProblem& prob, double n, const GradedTimeGrid& grid,
                                const RiccatiSettings& settings) {
    if (!(n >= 0.0)) throw InvalidArgument("penalty must be non-negative");
    const int M = prob.basis.modes();
    const int m = prob.control_dim;
    RiccatiProblem p = prob.with_terminal(SymOperator::identity(M, n));
    const Matrix I_M = Matrix::Identity(M, M);
    const Matrix I_m = Matrix::Identity(m, m);
    p.Q = [I_M](double) { return I_M; };
    p.R = [I_m](double) { return I_m; };
    p.delta = std::min(prob.delta, 1.0);
    return quasi_linearize(p, grid, settings);
}

NullControlSweep null_control_sweep(const RiccatiProblem& prob, const Vector& x0, const std::vector<double>& penalties,
                                    const GradedTimeGrid& grid, const MCConfig& mc,
                                    const NullControlSettings& settings) {
    if (penalties.empty()) throw InvalidArgument("no penalties given");
    for (std::size_t i = 1; i < penalties.size(); ++i)
        if (!(penalties[i] > penalties[i - 1])) throw InvalidArgument("penalties must be increasing");
    if (x0.size() != prob.basis.modes()) throw InvalidArgument("initial state has wrong dimension");
    const double T = grid.end();
    NullControlSweep s;
    s.penalties = penalties;
    for (int k = 1; k <= settings.probe_levels; ++k) {
        const double tau = std::ldexp(1.0, -k);
        if (tau < T) s.probe_times.push_back(T - tau);
    }
    if (s.probe_times.size() < 2) throw InvalidArgument("horizon too short for the probe schedule");

    for (double n : penalties) {
        const auto sol = penalty_riccati(prob, n, grid, settings.riccati);
        std::vector<double> row;
        for (double t : s.probe_times) row.push_back(x0.dot(sol.path.evaluate(t) * x0));
        s.values.push_back(std::move(row));
        RiccatiProblem p = prob.with_terminal(SymOperator::identity(prob.basis.modes(), n));
        const auto ens = simulate_paths(p, grid, x0, ControlPolicy::feedback(sol.gains), mc);
        s.terminal_msq.push_back(ens.data.mean_sq_norm(static_cast<int>(ens.data.times.size()) - 1));
    }

    const auto& last = s.values.back();
    if (x0.squaredNorm() == 0.0 || penalties.size() < 2) {
        s.verdict = "inconclusive";
        return s;
    }
    const auto& prev = s.values[s.values.size() - 2];
    s.saturation_ratio = prev.front() > 0.0 ? last.front() / prev.front() : std::numeric_limits<double>::infinity();
    std::vector<double> tau, val;
    for (std::size_t k = s.probe_times.size() / 2; k < s.probe_times.size(); ++k) {
        tau.push_back(T - s.probe_times[k]);
        val.push_back(last[k]);
    }
    s.growth_exponent = fit_loglog(tau, val).slope;
    s.terminal_ratio = s.terminal_msq.front() > 0.0 ? s.terminal_msq.back() / s.terminal_msq.front() : 0.0;
    const bool bounded_in_n = s.saturation_ratio <= settings.saturation_limit;
    const bool blows_up = s.growth_exponent <= settings.blowup_exponent;
    s.verdict = (bounded_in_n && blows_up) ? "null_controllable" : "not_null_controllable";
    return s;
}

void write_sweep_csv(std::ostream& os, const NullControlSweep& sweep) {
    csv::write_header(os, {"n", "probe_t", "value", "terminal_msq"});
    for (std::size_t i = 0; i < sweep.penalties.size(); ++i)
        for (std::size_t k = 0; k < sweep.probe_times.size(); ++k) {
            const double row[] = {sweep.penalties[i], sweep.probe_times[k], sweep.values[i][k], sweep.terminal_msq[i]};
            csv::write_row(os, row);
        }
}

}  // namespace spdelq
