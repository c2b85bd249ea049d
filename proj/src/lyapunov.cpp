#include "spdelq/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spdelq/errors.hpp"
#include "spdelq/kernels.hpp"
#include "spdelq/stats.hpp"

namespace spdelq {

namespace col = collocation;

void MCConfig::validate() const {
    if (paths < 1) throw InvalidArgument("paths must be at least 1");
    if (steps < 1) throw InvalidArgument("steps must be at least 1");
    if (noise_channels < 0) throw InvalidArgument("noise_channels must be non-negative");
}

LyapunovData LyapunovData::constant(const SpectralBasis& basis, double horizon, double alpha, const Matrix& drift,
                                    const std::vector<Matrix>& channels, const Matrix& source,
                                    const SymOperator& terminal) {
    LyapunovData d;
    d.basis = basis;
    d.horizon = horizon;
    d.alpha = alpha;
    d.terminal = terminal;
    LyapunovCoefficients c{drift, channels, source};
    d.coefficients = [c](double) { return c; };
    return d;
}

LyapunovData LyapunovData::uncontrolled(const SpectralBasis& basis, double horizon, double alpha, const Matrix& source,
                                        const SymOperator& terminal) {
    return constant(basis, horizon, alpha, Matrix(), basis.multipliers(), source, terminal);
}

Matrix lyapunov_integrand(const LyapunovCoefficients& coef, const Matrix& p) {
    Matrix g = coef.channels.empty() ? Matrix(Matrix::Zero(p.rows(), p.cols())) : kernels::channel_sum(coef.channels, p);
    if (coef.drift.size() > 0) {
        const Matrix pa = p * coef.drift;
        g += pa + pa.transpose();
    }
    if (coef.source.size() > 0) g += coef.source;
    return symmetrize(g);
}

namespace {

struct Solver {
    const LyapunovData& data;
    const LyapunovSettings& settings;
    std::vector<double> eigs;
    std::vector<DensePiece> pieces;  // filled right to left
    double worst_residual = 0.0;

    enum class Outcome { ok, stalled, blew_up };

    void check_coefficients(const LyapunovCoefficients& c, double t) const {
        const int m = data.basis.modes();
        if (c.drift.size() > 0 && (c.drift.rows() != m || c.drift.cols() != m))
            throw InvalidArgument("drift coefficient has wrong shape");
        if (c.source.size() > 0 && (c.source.rows() != m || c.source.cols() != m))
            throw InvalidArgument("source coefficient has wrong shape");
        for (const auto& ch : c.channels)
            if (ch.rows() != m || ch.cols() != m) throw InvalidArgument("noise coefficient has wrong shape");
        if (std::isfinite(data.drift_constant) && c.drift.size() > 0) {
            const double bound = data.drift_constant * std::pow(data.horizon - t, -data.alpha);
            if (spectral_norm(c.drift) > bound)
                throw InvalidArgument("drift exceeds c (T-s)^(-alpha) at t=" + std::to_string(t));
        }
    }

    bool finite_and_bounded(const Matrix& m) const {
        const double v = m.cwiseAbs().maxCoeff();
        return std::isfinite(v) && v <= settings.overflow_guard;
    }

    // One collocation step on [a, b] without subdivision. On success pushes a piece and
    // writes the left value.
    Outcome step(double a, double b, const Matrix& right, Matrix& left) {
        const double h = b - a;
        const auto w = col::interval_weights(eigs, h);
        const auto& cs = col::stage_nodes();
        std::array<LyapunovCoefficients, col::kStages> coef;
        for (int m = 0; m < col::kStages; ++m) {
            const double t = a + cs[static_cast<std::size_t>(m)] * h;
            coef[static_cast<std::size_t>(m)] = data.coefficients(t);
            check_coefficients(coef[static_cast<std::size_t>(m)], t);
        }
        std::array<Matrix, col::kStages> g, stage;
        for (int m = 0; m < col::kStages; ++m) g[static_cast<std::size_t>(m)] = lyapunov_integrand(coef[static_cast<std::size_t>(m)], right);
        for (int m = 0; m < col::kStages; ++m) stage[static_cast<std::size_t>(m)] = col::apply(w.at[static_cast<std::size_t>(m) + 1], right, g);

        double prev = std::numeric_limits<double>::infinity();
        int growth = 0;
        bool converged = false;
        double diff = 0.0;
        for (int it = 0; it < settings.inner_max; ++it) {
            for (int m = 0; m < col::kStages; ++m)
                g[static_cast<std::size_t>(m)] = lyapunov_integrand(coef[static_cast<std::size_t>(m)], stage[static_cast<std::size_t>(m)]);
            diff = 0.0;
            double scale = 1.0;
            for (int m = 0; m < col::kStages; ++m) {
                Matrix next = col::apply(w.at[static_cast<std::size_t>(m) + 1], right, g);
                if (!finite_and_bounded(next)) return Outcome::blew_up;
                diff = std::max(diff, (next - stage[static_cast<std::size_t>(m)]).cwiseAbs().maxCoeff());
                scale = std::max(scale, next.cwiseAbs().maxCoeff());
                stage[static_cast<std::size_t>(m)] = std::move(next);
            }
            if (diff <= settings.inner_tol * scale) {
                converged = true;
                break;
            }
            growth = (diff >= prev) ? growth + 1 : 0;
            if (growth >= 2) break;
            prev = diff;
        }
        if (!converged) {
            worst_residual = std::max(worst_residual, diff);
            return Outcome::stalled;
        }
        for (int m = 0; m < col::kStages; ++m)
            g[static_cast<std::size_t>(m)] = lyapunov_integrand(coef[static_cast<std::size_t>(m)], stage[static_cast<std::size_t>(m)]);
        left = symmetrize(col::apply(w.at[0], right, g));
        if (!finite_and_bounded(left)) return Outcome::blew_up;
        DensePiece piece;
        piece.a = a;
        piece.b = b;
        piece.right = right;
        for (int m = 0; m < col::kStages; ++m) {
            piece.sources[static_cast<std::size_t>(m)] = g[static_cast<std::size_t>(m)];
            piece.stage_values[static_cast<std::size_t>(m)] = symmetrize(col::apply(w.at[static_cast<std::size_t>(m) + 1], right, g));
        }
        pieces.push_back(std::move(piece));
        return Outcome::ok;
    }

    // Step with recursive halving; returns the left value.
    Matrix solve_interval(double a, double b, const Matrix& right, int depth) {
        Matrix left;
        const std::size_t mark = pieces.size();
        const Outcome o = step(a, b, right, left);
        if (o == Outcome::ok) return left;
        pieces.resize(mark);
        if (depth >= settings.max_depth) {
            if (o == Outcome::blew_up)
                throw SingularityError("Lyapunov solution exceeded the overflow guard on [" + std::to_string(a) + ", " +
                                       std::to_string(b) + "]");
            throw IterationLimitError("stage fixed point did not converge on [" + std::to_string(a) + ", " +
                                          std::to_string(b) + "] after " + std::to_string(settings.max_depth) +
                                          " halvings",
                                      worst_residual);
        }
        const double mid = 0.5 * (a + b);
        const Matrix m = solve_interval(mid, b, right, depth + 1);
        return solve_interval(a, mid, m, depth + 1);
    }
};

}  // namespace

OperatorPath solve_lyapunov(const LyapunovData& data, const GradedTimeGrid& grid, const LyapunovSettings& settings) {
    const int m = data.basis.modes();
    if (m < 1) throw InvalidArgument("empty basis");
    if (!data.coefficients) throw InvalidArgument("Lyapunov data has no coefficients");
    if (data.terminal.dim() != m) throw InvalidArgument("terminal value has wrong dimension");
    if (grid.intervals() < 1) throw InvalidArgument("grid has no intervals");
    if (std::abs(grid.end() - data.horizon) > 1e-12 * std::max(1.0, data.horizon))
        throw InvalidArgument("grid end does not match the horizon");
    if (settings.inner_tol <= 0.0 || settings.inner_max < 1) throw InvalidArgument("invalid inner solver settings");

    Solver s{data, settings, data.basis.eigenvalues(), {}, 0.0};
    const int k_max = grid.intervals();
    std::vector<SymOperator> values(static_cast<std::size_t>(k_max) + 1);
    Matrix p = data.terminal.matrix();
    values.back() = data.terminal;
    for (int k = k_max - 1; k >= 0; --k) {
        p = s.solve_interval(grid[k], grid[k + 1], p, 0);
        values[static_cast<std::size_t>(k)] = SymOperator(p);
    }
    std::reverse(s.pieces.begin(), s.pieces.end());
    return OperatorPath(grid, std::move(values), s.eigs, std::move(s.pieces));
}

McEstimate representation_value(const LyapunovData& data, double t, const Vector& x, const MCConfig& mc) {
    mc.validate();
    const int m = data.basis.modes();
    if (x.size() != m) throw InvalidArgument("state has wrong dimension");
    if (!(t < data.horizon)) throw InvalidArgument("representation needs t < T");
    if (mc.paths < 2) throw InvalidArgument("representation needs at least two paths");
    const GradedTimeGrid grid = graded_grid(data.horizon - t, std::max(2, mc.steps), data.alpha).shifted(t);
    const auto& eigs = data.basis.eigenvalues();
    const int last = grid.intervals();

    // Coefficients are needed at every node but the last, once for the step and once for
    // the observation.
    std::vector<LyapunovCoefficients> coef(static_cast<std::size_t>(last));
    for (int k = 0; k < last; ++k) coef[static_cast<std::size_t>(k)] = data.coefficients(grid[k]);
    int noise = 0;
    for (const auto& c : coef) noise = std::max(noise, static_cast<int>(c.channels.size()));
    if (mc.noise_channels > 0) noise = std::min(noise, mc.noise_channels);

    kernels::EnsembleSpec spec;
    spec.dim = m;
    spec.noise = noise;
    spec.paths = mc.paths;
    spec.seed = mc.seed;
    spec.x0 = x;
    spec.times = grid.nodes();
    spec.term_count = 1;
    spec.terminal_weight = data.terminal.matrix();
    spec.step = [&](int k) {
        const auto& c = coef[static_cast<std::size_t>(k)];
        kernels::StepData st;
        st.dt = grid[k + 1] - grid[k];
        st.drift = Matrix::Identity(m, m);
        if (c.drift.size() > 0) st.drift += st.dt * c.drift;
        if (noise > 0) {
            st.channels = Matrix::Zero(static_cast<Eigen::Index>(noise) * m, m);
            for (int j = 0; j < noise && j < static_cast<int>(c.channels.size()); ++j)
                st.channels.middleRows(static_cast<Eigen::Index>(j) * m, m) = c.channels[static_cast<std::size_t>(j)];
        }
        st.decay.resize(m);
        for (int i = 0; i < m; ++i) st.decay(i) = std::exp(eigs[static_cast<std::size_t>(i)] * st.dt);
        return st;
    };
    spec.observe = [&](int k) {
        kernels::ObservationData obs;
        kernels::QuadraticTerm term;
        if (k < last) {
            const auto& src = coef[static_cast<std::size_t>(k)].source;
            if (src.size() > 0 && !src.allFinite()) obs.singular = true;
            if (src.size() > 0) {
                term.kx = Matrix::Identity(m, m);
                term.weight = src;
            }
        } else {
            obs.singular = true;
        }
        obs.terms.push_back(std::move(term));
        return obs;
    };
    const auto ens = kernels::run_ensemble(spec);
    std::vector<double> total(static_cast<std::size_t>(mc.paths));
    for (std::size_t p = 0; p < total.size(); ++p) total[p] = ens.terminal[p] + ens.integrals[0][p];
    const auto sum = summarize(total);
    return {sum.mean, sum.ci_halfwidth, sum.count};
}

SingularBound singular_sum_bound(const OperatorPath& path, const LyapunovData& data) {
    SingularBound r;
    const auto& grid = path.grid();
    const double T = grid.end();
    double worst = 0.0;
    for (int k = 0; k < grid.intervals(); ++k) {
        const auto coef = data.coefficients(grid[k]);
        double s = 0.0;
        if (!coef.channels.empty()) s = spectral_norm(kernels::channel_sum(coef.channels, path.value(k).matrix()));
        r.distances.push_back(T - grid[k]);
        r.values.push_back(s);
        worst = std::max(worst, s * std::pow(T - grid[k], 2.0 * data.alpha));
    }
    r.constant = worst;
    const auto fit = fit_loglog(r.distances, r.values);
    r.fitted_exponent = fit.slope;
    r.prefactor = std::isfinite(fit.intercept) ? std::exp(fit.intercept) : 0.0;
    return r;
}

APrioriReport a_priori_check(const OperatorPath& path, const LyapunovData& data, double constant) {
    APrioriReport r;
    const auto& grid = path.grid();
    const int last = grid.intervals();
    // Tail integrals of |f| with interior Gauss points, so a singular f(T) is never touched.
    const auto& cs = col::stage_nodes();
    static constexpr std::array<double, 3> gw = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    std::vector<double> tail(static_cast<std::size_t>(last) + 1, 0.0);
    for (int k = last - 1; k >= 0; --k) {
        const double h = grid[k + 1] - grid[k];
        double add = 0.0;
        for (int m = 0; m < 3; ++m) {
            const auto c = data.coefficients(grid[k] + cs[static_cast<std::size_t>(m)] * h);
            if (c.source.size() > 0) add += gw[static_cast<std::size_t>(m)] * h * spectral_norm(c.source);
        }
        tail[static_cast<std::size_t>(k)] = tail[static_cast<std::size_t>(k) + 1] + add;
    }
    const double g = data.terminal.norm();
    for (int k = 0; k <= last; ++k) {
        const double p = path.value(k).norm();
        const double denom = g + tail[static_cast<std::size_t>(k)];
        double ratio = 0.0;
        if (denom > 0.0) ratio = p / denom;
        else if (p > 0.0) ratio = std::numeric_limits<double>::infinity();
        r.worst_ratio = std::max(r.worst_ratio, ratio);
    }
    r.passed = r.worst_ratio <= constant;
    return r;
}

}  // namespace spdelq
