#include "spdelq/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>

#include "spdelq/csv.hpp"
#include "spdelq/errors.hpp"
#include "spdelq/philox.hpp"
#include "spdelq/stats.hpp"

namespace spdelq {

ControlPolicy ControlPolicy::zero(int control_dim) {
    ControlPolicy p;
    p.kind = Kind::open_loop;
    p.control_dim = control_dim;
    return p;
}

ControlPolicy ControlPolicy::open_loop(int control_dim, std::function<Vector(double)> offset) {
    ControlPolicy p = zero(control_dim);
    p.offset = std::move(offset);
    return p;
}

ControlPolicy ControlPolicy::feedback(const GainPath& gains, const Matrix& perturbation) {
    auto shared = std::make_shared<const GainPath>(gains);
    ControlPolicy p;
    p.kind = Kind::feedback;
    p.control_dim = static_cast<int>(gains.gains.front().rows());
    if (perturbation.size() > 0)
        p.gain = [shared, perturbation](double t) { return Matrix(shared->lookup(t) + perturbation); };
    else
        p.gain = [shared](double t) { return shared->lookup(t); };
    return p;
}

ControlPolicy ControlPolicy::constant_feedback(const Matrix& gain) {
    ControlPolicy p;
    p.kind = Kind::feedback;
    p.control_dim = static_cast<int>(gain.rows());
    p.gain = [gain](double) { return gain; };
    return p;
}

ControlPolicy ControlPolicy::affine(const GainPath& gains, std::function<Vector(double)> offset,
                                    const Matrix& perturbation) {
    ControlPolicy p = feedback(gains, perturbation);
    p.kind = Kind::affine;
    p.offset = std::move(offset);
    return p;
}

Matrix ControlPolicy::gain_at(double t, int state_dim) const {
    if (!gain) return Matrix::Zero(control_dim, state_dim);
    return gain(t);
}

Vector ControlPolicy::offset_at(double t) const {
    if (!offset) return Vector();
    return offset(t);
}

std::vector<double> Ensemble::path_costs() const {
    std::vector<double> c(static_cast<std::size_t>(data.paths));
    for (std::size_t p = 0; p < c.size(); ++p)
        c[p] = data.terminal[p] + data.integrals[kStateCost][p] + data.integrals[kControlCost][p];
    return c;
}

namespace {

std::vector<double> refine(const GradedTimeGrid& grid, int steps, std::vector<int>& node_index) {
    std::vector<double> times;
    node_index.clear();
    for (int k = 0; k < grid.intervals(); ++k) {
        node_index.push_back(static_cast<int>(times.size()));
        const double a = grid[k];
        const double h = grid[k + 1] - a;
        for (int i = 0; i < steps; ++i) times.push_back(a + h * i / steps);
    }
    node_index.push_back(static_cast<int>(times.size()));
    times.push_back(grid.end());
    return times;
}

Vector decay_factors(const std::vector<double>& eigs, double dt) {
    Vector d(static_cast<Eigen::Index>(eigs.size()));
    for (std::size_t i = 0; i < eigs.size(); ++i) d(static_cast<Eigen::Index>(i)) = std::exp(eigs[i] * dt);
    return d;
}

}  // namespace

Ensemble simulate_paths(const RiccatiProblem& prob, const GradedTimeGrid& grid, const Vector& x0,
                        const ControlPolicy& policy, const MCConfig& mc, const SimulationOptions& options) {
    mc.validate();
    const int M = prob.basis.modes();
    const int m = prob.control_dim;
    if (x0.size() != M) throw InvalidArgument("initial state has wrong dimension");
    if (policy.control_dim != m) throw InvalidArgument("policy control dimension does not match the problem");
    if (grid.start() != 0.0 || std::abs(grid.end() - prob.horizon) > 1e-12 * std::max(1.0, prob.horizon))
        throw InvalidArgument("grid must span [0, T] of the problem");
    const int available = prob.basis.noise_channels();
    const int noise = mc.noise_channels > 0 ? std::min(mc.noise_channels, available) : available;

    Ensemble ens;
    ens.state_dim = M;
    ens.control_dim = m;
    kernels::EnsembleSpec spec;
    spec.dim = M;
    spec.control_dim = m;
    spec.noise = noise;
    spec.paths = mc.paths;
    spec.seed = mc.seed;
    spec.x0 = x0;
    spec.times = refine(grid, mc.steps, ens.node_index);
    spec.term_count = Ensemble::kBuiltinTerms + static_cast<int>(options.extra_terms.size());
    spec.terminal_weight = prob.G.matrix();
    spec.store_states = mc.store_states;
    const auto& times = spec.times;
    const auto& eigs = prob.basis.eigenvalues();

    spec.step = [&](int k) {
        const double s = times[static_cast<std::size_t>(k)];
        kernels::StepData st;
        st.dt = times[static_cast<std::size_t>(k) + 1] - s;
        const Matrix K = policy.gain_at(s, M);
        const Vector v = policy.offset_at(s);
        const Matrix B = prob.B(s);
        st.drift = Matrix::Identity(M, M) + st.dt * (B * K);
        if (v.size() > 0) st.shift = st.dt * (B * v);
        const auto D = prob.control_noise(s);
        if (noise > 0) {
            st.channels.resize(static_cast<Eigen::Index>(noise) * M, M);
            const bool shifted = v.size() > 0 && !D.empty();
            if (shifted) st.channel_shift = Vector::Zero(static_cast<Eigen::Index>(noise) * M);
            for (int j = 0; j < noise; ++j) {
                auto blk = st.channels.middleRows(static_cast<Eigen::Index>(j) * M, M);
                blk = prob.basis.multiplier(j);
                if (static_cast<std::size_t>(j) < D.size()) {
                    blk += D[static_cast<std::size_t>(j)] * K;
                    if (shifted) st.channel_shift.segment(static_cast<Eigen::Index>(j) * M, M) = D[static_cast<std::size_t>(j)] * v;
                }
            }
        }
        st.decay = decay_factors(eigs, st.dt);
        return st;
    };
    spec.observe = [&](int k) {
        const double s = times[static_cast<std::size_t>(k)];
        kernels::ObservationData obs;
        obs.feedback = policy.gain_at(s, M);
        obs.offset = policy.offset_at(s);
        obs.terms.push_back({Matrix::Identity(M, M), Matrix(), prob.Q(s)});
        obs.terms.push_back({Matrix(), Matrix::Identity(m, m), prob.R(s)});
        obs.terms.push_back({Matrix(), Matrix::Identity(m, m), Matrix::Identity(m, m)});
        for (const auto& f : options.extra_terms) obs.terms.push_back(f(s));
        return obs;
    };
    ens.data = options.use_serial_reference ? kernels::run_ensemble_serial(spec) : kernels::run_ensemble(spec);
    return ens;
}

CostReport estimate_cost(const RiccatiProblem& prob, const Ensemble& ensemble, const ControlPolicy& policy) {
    if (ensemble.state_dim != prob.basis.modes() || ensemble.control_dim != prob.control_dim ||
        policy.control_dim != prob.control_dim)
        throw InvalidArgument("ensemble, policy and problem dimensions do not match");
    const auto& d = ensemble.data;
    if (d.paths < 1) throw InvalidArgument("empty ensemble");
    const double n = static_cast<double>(d.paths);
    CostReport r;
    r.paths_used = d.paths;
    r.terminal_term = pairwise_sum(d.terminal) / n;
    r.running_state_term = pairwise_sum(d.integrals[Ensemble::kStateCost]) / n;
    r.running_control_term = pairwise_sum(d.integrals[Ensemble::kControlCost]) / n;
    r.estimate = r.terminal_term + r.running_state_term + r.running_control_term;
    r.ci_halfwidth = summarize(ensemble.path_costs()).ci_halfwidth;
    return r;
}

ValueIdentityReport verify_value_identity(const RiccatiProblem& prob, const RiccatiSolution& solution,
                                          const Vector& x0, const ControlPolicy& policy, const MCConfig& mc,
                                          const ValueIdentitySettings& settings) {
    const int m = prob.control_dim;
    const OperatorPath& path = solution.path;
    SimulationOptions opts;
    opts.extra_terms.push_back([&prob, &path, m](double s) {
        const auto lr = lambda_operator(prob, s, path.evaluate(s));
        return kernels::QuadraticTerm{-lr.gain, Matrix::Identity(m, m), lr.Lambda.matrix()};
    });
    const Ensemble ens = simulate_paths(prob, path.grid(), x0, policy, mc, opts);

    ValueIdentityReport r;
    r.cost = estimate_cost(prob, ens, policy);
    r.value = path.front().quadratic_form(x0);
    const auto costs = ens.path_costs();
    const auto& dev = ens.extra(0);
    std::vector<double> lhs(costs.size()), diff(costs.size());
    for (std::size_t p = 0; p < costs.size(); ++p) {
        lhs[p] = costs[p] - r.value;
        diff[p] = lhs[p] - dev[p];
    }
    const auto sl = summarize(lhs);
    const auto sr = summarize(dev);
    const auto sd = summarize(diff);
    r.lhs = sl.mean;
    r.rhs = sr.mean;
    r.gap = std::abs(sd.mean);
    r.ci_lhs = sl.ci_halfwidth;
    r.ci_rhs = sr.ci_halfwidth;
    r.ci_combined = sd.ci_halfwidth;
    r.allowance = settings.allowance_rel * std::abs(r.value);
    r.passed = r.gap <= settings.ci_multiplier * r.ci_combined + r.allowance;
    r.path_costs = costs;
    return r;
}

PicardReport picard_forward(const LyapunovData& data, double t, const Vector& x, int iterations, const MCConfig& mc) {
    mc.validate();
    if (iterations < 2) throw InvalidArgument("Picard needs at least two iterations");
    const int M = data.basis.modes();
    if (x.size() != M) throw InvalidArgument("state has wrong dimension");
    if (!(t < data.horizon)) throw InvalidArgument("Picard needs t < T");
    const GradedTimeGrid grid = graded_grid(data.horizon - t, std::max(2, mc.steps), data.alpha).shifted(t);
    const int S = grid.intervals();
    const auto& eigs = data.basis.eigenvalues();

    std::vector<LyapunovCoefficients> coef(static_cast<std::size_t>(S));
    std::vector<Vector> decay(static_cast<std::size_t>(S));
    int noise = 0;
    for (int k = 0; k < S; ++k) {
        coef[static_cast<std::size_t>(k)] = data.coefficients(grid[k]);
        decay[static_cast<std::size_t>(k)] = decay_factors(eigs, grid[k + 1] - grid[k]);
        noise = std::max(noise, static_cast<int>(coef[static_cast<std::size_t>(k)].channels.size()));
    }
    if (mc.noise_channels > 0) noise = std::min(noise, mc.noise_channels);
    const int pad = noise + noise % 2;
    const auto npaths = mc.paths;
    const std::size_t stride = static_cast<std::size_t>(iterations) * static_cast<std::size_t>(S + 1);
    std::vector<double> sq(static_cast<std::size_t>(npaths) * stride, 0.0);

#pragma omp parallel for schedule(static)
    for (long long p = 0; p < npaths; ++p) {
        const PathStream stream(mc.seed, static_cast<std::uint64_t>(p));
        std::vector<double> xi(static_cast<std::size_t>(S) * static_cast<std::size_t>(std::max(noise, 1)));
        for (int k = 0; k < S; ++k)
            stream.normals(static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(pad),
                           xi.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(std::max(noise, 1)), noise);
        std::vector<Vector> prev(static_cast<std::size_t>(S) + 1, Vector::Zero(M));
        std::vector<Vector> next(static_cast<std::size_t>(S) + 1);
        for (int n = 0; n < iterations; ++n) {
            next[0] = x;
            for (int k = 0; k < S; ++k) {
                const auto& c = coef[static_cast<std::size_t>(k)];
                const double dt = grid[k + 1] - grid[k];
                const Vector& y = prev[static_cast<std::size_t>(k)];
                Vector z = next[static_cast<std::size_t>(k)];
                if (c.drift.size() > 0) z += dt * (c.drift * y);
                const double sdt = std::sqrt(dt);
                for (int j = 0; j < noise && j < static_cast<int>(c.channels.size()); ++j)
                    z += (c.channels[static_cast<std::size_t>(j)] * y) *
                         (sdt * xi[static_cast<std::size_t>(k) * static_cast<std::size_t>(std::max(noise, 1)) + static_cast<std::size_t>(j)]);
                next[static_cast<std::size_t>(k) + 1] = decay[static_cast<std::size_t>(k)].cwiseProduct(z);
            }
            double* out = sq.data() + static_cast<std::size_t>(p) * stride + static_cast<std::size_t>(n) * static_cast<std::size_t>(S + 1);
            for (int k = 0; k <= S; ++k) out[k] = (next[static_cast<std::size_t>(k)] - prev[static_cast<std::size_t>(k)]).squaredNorm();
            std::swap(prev, next);
        }
    }

    PicardReport r;
    std::vector<double> column(static_cast<std::size_t>(npaths));
    int growth = 0;
    for (int n = 0; n < iterations; ++n) {
        double sup = 0.0;
        for (int k = 0; k <= S; ++k) {
            for (long long p = 0; p < npaths; ++p)
                column[static_cast<std::size_t>(p)] =
                    sq[static_cast<std::size_t>(p) * stride + static_cast<std::size_t>(n) * static_cast<std::size_t>(S + 1) + static_cast<std::size_t>(k)];
            sup = std::max(sup, pairwise_sum(column) / static_cast<double>(npaths));
        }
        if (!r.distances.empty() && sup > r.distances.back()) ++growth;
        else growth = 0;
        if (growth >= 3) r.non_contraction = true;
        r.distances.push_back(sup);
    }
    return r;
}

double moment_bound_constant(const Ensemble& ensemble, const Vector& x0) {
    const auto& d = ensemble.data;
    const double energy = pairwise_sum(d.integrals[Ensemble::kControlEnergy]) / static_cast<double>(d.paths);
    const double denom = x0.squaredNorm() + energy;
    double sup = 0.0;
    for (std::size_t k = 0; k < d.times.size(); ++k) sup = std::max(sup, d.mean_sq_norm(static_cast<int>(k)));
    return denom > 0.0 ? sup / denom : 0.0;
}

void write_moment_csv(std::ostream& os, const Ensemble& ensemble) {
    csv::write_header(os, {"t", "mean_sq_norm", "var_sq_norm"});
    const auto& d = ensemble.data;
    for (std::size_t k = 0; k < d.times.size(); ++k) {
        const double row[] = {d.times[k], d.mean_sq_norm(static_cast<int>(k)), d.var_sq_norm(static_cast<int>(k))};
        csv::write_row(os, row);
    }
}

void write_cost_csv(std::ostream& os, const CostReport& cost) {
    csv::write_header(os, {"estimate", "ci_halfwidth", "terminal_term", "running_state_term", "running_control_term",
                           "paths_used"});
    const double row[] = {cost.estimate, cost.ci_halfwidth, cost.terminal_term, cost.running_state_term,
                          cost.running_control_term, static_cast<double>(cost.paths_used)};
    csv::write_row(os, row);
}

void write_binary_dump(std::ostream& os, const Ensemble& ensemble) {
    const auto& d = ensemble.data;
    if (d.states.empty()) throw InvalidArgument("ensemble was simulated without stored states");
    os.write("LQSP", 4);
    const std::uint32_t version = 1;
    const auto dim = static_cast<std::uint32_t>(d.dim);
    const auto paths = static_cast<std::uint64_t>(d.paths);
    const auto nodes = static_cast<std::uint64_t>(d.times.size());
    os.write(reinterpret_cast<const char*>(&version), sizeof version);
    os.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    os.write(reinterpret_cast<const char*>(&paths), sizeof paths);
    os.write(reinterpret_cast<const char*>(&nodes), sizeof nodes);
    os.write(reinterpret_cast<const char*>(d.states.data()), static_cast<std::streamsize>(d.states.size() * sizeof(double)));
}

}  // namespace spdelq
