#include "spdelq/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <omp.h>

#include "spdelq/errors.hpp"
#include "spdelq/philox.hpp"
#include "spdelq/stats.hpp"

namespace spdelq::kernels {

namespace {

// Below this much work a parallel region costs more than it saves.
constexpr double kParallelFlops = 2e5;

Matrix sum_in_order(const std::vector<Matrix>& parts, Eigen::Index n) {
    Matrix out = Matrix::Zero(n, n);
    for (const auto& p : parts) out += p;
    return out;
}

}  // namespace

Matrix channel_sum_serial(std::span<const Matrix> channels, const Matrix& p) {
    std::vector<Matrix> parts(channels.size());
    for (std::size_t j = 0; j < channels.size(); ++j) {
        const Matrix pc = p * channels[j];
        parts[j] = channels[j].transpose() * pc;
    }
    return symmetrize(sum_in_order(parts, p.rows()));
}

Matrix channel_sum(std::span<const Matrix> channels, const Matrix& p) {
    const auto n = static_cast<long long>(channels.size());
    const double flops = 4.0 * static_cast<double>(n) * std::pow(static_cast<double>(p.rows()), 3);
    std::vector<Matrix> parts(channels.size());
#pragma omp parallel for schedule(static) if (flops > kParallelFlops && n > 1)
    for (long long j = 0; j < n; ++j) {
        const auto& c = channels[static_cast<std::size_t>(j)];
        const Matrix pc = p * c;
        parts[static_cast<std::size_t>(j)] = c.transpose() * pc;
    }
    return symmetrize(sum_in_order(parts, p.rows()));
}

double EnsembleData::mean_sq_norm(int k) const {
    const auto& b = block_sq[static_cast<std::size_t>(k)];
    return pairwise_sum(b) / static_cast<double>(paths);
}

double EnsembleData::var_sq_norm(int k) const {
    if (paths < 2) return 0.0;
    const double mean = mean_sq_norm(k);
    const double second = pairwise_sum(block_quartic[static_cast<std::size_t>(k)]) / static_cast<double>(paths);
    const double n = static_cast<double>(paths);
    return std::max(0.0, (second - mean * mean) * n / (n - 1.0));
}

namespace {

struct Workspace {
    const EnsembleSpec& spec;
    int steps;
    int blocks;
    int noise_pad;
    EnsembleData out;
    Matrix x;                       // dim x paths
    std::vector<double> phi_prev;   // terms x paths
    bool prev_singular = false;

    explicit Workspace(const EnsembleSpec& s) : spec(s) {
        if (s.dim <= 0 || s.paths <= 0) throw InvalidArgument("ensemble needs dim >= 1 and paths >= 1");
        if (s.times.size() < 2) throw InvalidArgument("ensemble needs at least two time points");
        if (s.x0.size() != s.dim) throw InvalidArgument("initial state has wrong dimension");
        steps = static_cast<int>(s.times.size()) - 1;
        blocks = static_cast<int>((s.paths + kBlock - 1) / kBlock);
        noise_pad = s.noise + (s.noise % 2);
        out.paths = s.paths;
        out.dim = s.dim;
        out.times = s.times;
        out.integrals.assign(static_cast<std::size_t>(s.term_count),
                             std::vector<double>(static_cast<std::size_t>(s.paths), 0.0));
        out.block_sq.assign(s.times.size(), std::vector<double>(static_cast<std::size_t>(blocks), 0.0));
        out.block_quartic = out.block_sq;
        if (s.store_states)
            out.states.assign(static_cast<std::size_t>(s.paths) * s.times.size() * static_cast<std::size_t>(s.dim), 0.0);
        x = s.x0.replicate(1, static_cast<Eigen::Index>(s.paths));
        phi_prev.assign(static_cast<std::size_t>(s.term_count) * static_cast<std::size_t>(s.paths), 0.0);
    }

    std::pair<long long, long long> block_range(int b) const {
        const long long p0 = static_cast<long long>(b) * kBlock;
        return {p0, std::min(spec.paths, p0 + kBlock)};
    }

    // Trapezoid contribution of the interval ending at point k, given the new values.
    void accumulate(int k, long long path, int term, double phi, bool singular) {
        const auto idx = static_cast<std::size_t>(term) * static_cast<std::size_t>(spec.paths) + static_cast<std::size_t>(path);
        if (k > 0) {
            const double dt = spec.times[static_cast<std::size_t>(k)] - spec.times[static_cast<std::size_t>(k) - 1];
            double add = 0.0;
            if (!singular && !prev_singular) add = 0.5 * dt * (phi_prev[idx] + phi);
            else if (singular && !prev_singular) add = dt * phi_prev[idx];
            else if (!singular && prev_singular) add = dt * phi;
            out.integrals[static_cast<std::size_t>(term)][static_cast<std::size_t>(path)] += add;
        }
        phi_prev[idx] = singular ? 0.0 : phi;
    }

    void record_state(int k, long long path, const double* xs) {
        if (!spec.store_states) return;
        const std::size_t base = (static_cast<std::size_t>(path) * spec.times.size() + static_cast<std::size_t>(k)) *
                                 static_cast<std::size_t>(spec.dim);
        std::copy(xs, xs + spec.dim, out.states.begin() + static_cast<std::ptrdiff_t>(base));
    }

    void finish() {
        out.final_state = x;
        out.terminal.assign(static_cast<std::size_t>(spec.paths), 0.0);
        if (spec.terminal_weight.size() > 0) {
            for (long long p = 0; p < spec.paths; ++p) {
                const auto col = x.col(static_cast<Eigen::Index>(p));
                out.terminal[static_cast<std::size_t>(p)] = col.dot(spec.terminal_weight * col);
            }
        }
    }
};

[[noreturn]] void throw_unstable(long long path, double t) {
    throw InstabilityError("path " + std::to_string(path) + " exceeded the overflow guard at t=" +
                               std::to_string(t) + "; refine the time grid",
                           path);
}

// Evaluates the observation on a block of states (dim x n) and feeds the accumulators.
// Returns the first path index that overflowed, or -1.
long long observe_block(Workspace& w, int k, const ObservationData& obs, long long p0, const Matrix& xb) {
    const auto n = xb.cols();
    const auto& spec = w.spec;
    Matrix u;
    if (spec.control_dim > 0) {
        u = (obs.feedback.size() > 0) ? Matrix(obs.feedback * xb) : Matrix::Zero(spec.control_dim, n);
        if (obs.offset.size() > 0) u.colwise() += obs.offset;
    }
    for (int t = 0; t < spec.term_count; ++t) {
        const auto& term = obs.terms[static_cast<std::size_t>(t)];
        Matrix y;
        if (!obs.singular) {
            if (term.kx.size() > 0) y = term.kx * xb;
            if (term.ku.size() > 0) y = (y.size() > 0) ? Matrix(y + term.ku * u) : Matrix(term.ku * u);
        }
        for (Eigen::Index c = 0; c < n; ++c) {
            double phi = 0.0;
            if (!obs.singular && y.size() > 0) phi = y.col(c).dot(term.weight * y.col(c));
            w.accumulate(k, p0 + c, t, phi, obs.singular);
        }
    }
    const int b = static_cast<int>(p0 / kBlock);
    double s2 = 0.0, s4 = 0.0;
    long long bad = -1;
    for (Eigen::Index c = 0; c < n; ++c) {
        const double q = xb.col(c).squaredNorm();
        if (!(q <= spec.overflow_guard) && bad < 0) bad = p0 + c;
        s2 += q;
        s4 += q * q;
        w.record_state(k, p0 + c, xb.col(c).data());
    }
    w.out.block_sq[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)] = s2;
    w.out.block_quartic[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)] = s4;
    return bad;
}

void advance_block(const Workspace& w, int k, const StepData& st, long long p0, Eigen::Ref<Matrix> xb) {
    const auto& spec = w.spec;
    Matrix y = (st.drift.size() > 0) ? Matrix(st.drift * xb) : Matrix(xb);
    if (st.shift.size() > 0) y.colwise() += st.shift;
    if (spec.noise > 0 && st.channels.size() > 0) {
        Matrix s = st.channels * xb;
        if (st.channel_shift.size() > 0) s.colwise() += st.channel_shift;
        const double sq = std::sqrt(st.dt);
        std::vector<double> xi(static_cast<std::size_t>(spec.noise));
        for (Eigen::Index c = 0; c < xb.cols(); ++c) {
            PathStream(spec.seed, static_cast<std::uint64_t>(p0 + c))
                .normals(static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(w.noise_pad), xi.data(), spec.noise);
            for (int j = 0; j < spec.noise; ++j)
                y.col(c) += s.block(static_cast<Eigen::Index>(j) * spec.dim, c, spec.dim, 1) * (sq * xi[static_cast<std::size_t>(j)]);
        }
    }
    xb = st.decay.asDiagonal() * y;
}

void advance_path(const Workspace& w, int k, const StepData& st, long long p, Eigen::Ref<Vector> x) {
    const auto& spec = w.spec;
    Vector y = (st.drift.size() > 0) ? Vector(st.drift * x) : Vector(x);
    if (st.shift.size() > 0) y += st.shift;
    if (spec.noise > 0 && st.channels.size() > 0) {
        Vector s = st.channels * x;
        if (st.channel_shift.size() > 0) s += st.channel_shift;
        const double sq = std::sqrt(st.dt);
        std::vector<double> xi(static_cast<std::size_t>(spec.noise));
        PathStream(spec.seed, static_cast<std::uint64_t>(p))
            .normals(static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(w.noise_pad), xi.data(), spec.noise);
        for (int j = 0; j < spec.noise; ++j)
            y += s.segment(static_cast<Eigen::Index>(j) * spec.dim, spec.dim) * (sq * xi[static_cast<std::size_t>(j)]);
    }
    x = st.decay.cwiseProduct(y);
}

void check_dims(const EnsembleSpec& spec, const ObservationData& obs) {
    if (static_cast<int>(obs.terms.size()) != spec.term_count)
        throw InvalidArgument("observation has " + std::to_string(obs.terms.size()) + " terms, expected " +
                              std::to_string(spec.term_count));
}

}  // namespace

EnsembleData run_ensemble(const EnsembleSpec& spec) {
    Workspace w(spec);
    for (int k = 0; k <= w.steps; ++k) {
        StepData st;
        if (k > 0) st = spec.step(k - 1);
        const ObservationData obs = spec.observe(k);
        check_dims(spec, obs);
        long long bad = std::numeric_limits<long long>::max();
#pragma omp parallel for schedule(static) reduction(min : bad)
        for (int b = 0; b < w.blocks; ++b) {
            const auto [p0, p1] = w.block_range(b);
            auto xb = w.x.middleCols(static_cast<Eigen::Index>(p0), static_cast<Eigen::Index>(p1 - p0));
            if (k > 0) advance_block(w, k - 1, st, p0, xb);
            const long long f = observe_block(w, k, obs, p0, xb);
            if (f >= 0) bad = std::min(bad, f);
        }
        if (bad < spec.paths) throw_unstable(bad, spec.times[static_cast<std::size_t>(k)]);
        w.prev_singular = obs.singular;
    }
    w.finish();
    return std::move(w.out);
}

EnsembleData run_ensemble_serial(const EnsembleSpec& spec) {
    Workspace w(spec);
    for (int k = 0; k <= w.steps; ++k) {
        StepData st;
        if (k > 0) st = spec.step(k - 1);
        const ObservationData obs = spec.observe(k);
        check_dims(spec, obs);
        for (int b = 0; b < w.blocks; ++b) {
            const auto [p0, p1] = w.block_range(b);
            if (k > 0) {
                for (long long p = p0; p < p1; ++p) {
                    Vector x = w.x.col(static_cast<Eigen::Index>(p));
                    advance_path(w, k - 1, st, p, x);
                    w.x.col(static_cast<Eigen::Index>(p)) = x;
                }
            }
            const Matrix xb = w.x.middleCols(static_cast<Eigen::Index>(p0), static_cast<Eigen::Index>(p1 - p0));
            const long long f = observe_block(w, k, obs, p0, xb);
            if (f >= 0) throw_unstable(f, spec.times[static_cast<std::size_t>(k)]);
        }
        w.prev_singular = obs.singular;
    }
    w.finish();
    return std::move(w.out);
}

}  // namespace spdelq::kernels
