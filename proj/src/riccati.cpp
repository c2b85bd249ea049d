#include "spdelq/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "spdelq/errors.hpp"
#include "spdelq/kernels.hpp"

namespace spdelq {

RiccatiProblem RiccatiProblem::constant(const SpectralBasis& basis, const Matrix& B, const std::vector<Matrix>& D,
                                        const Matrix& Q, const Matrix& R, const SymOperator& G, double delta,
                                        double alpha, double horizon) {
    RiccatiProblem p;
    p.basis = basis;
    p.control_dim = static_cast<int>(B.cols());
    p.B = [B](double) { return B; };
    if (!D.empty()) p.D = [D](double) { return D; };
    p.Q = [Q](double) { return Q; };
    p.R = [R](double) { return R; };
    p.G = G;
    p.delta = delta;
    p.alpha = alpha;
    p.horizon = horizon;
    p.time_invariant = true;
    return p;
}

std::vector<Matrix> RiccatiProblem::control_noise(double t) const {
    if (!D) return {};
    return D(t);
}

RiccatiProblem RiccatiProblem::with_terminal(const SymOperator& g) const {
    RiccatiProblem p = *this;
    p.G = g;
    return p;
}

RiccatiProblem RiccatiProblem::with_horizon(double t) const {
    RiccatiProblem p = *this;
    p.horizon = t;
    return p;
}

namespace {

double psd_tolerance(const Matrix& m) { return 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff()); }

void check_at(const RiccatiProblem& p, double t) {
    const int M = p.basis.modes();
    const int m = p.control_dim;
    const std::string at = " at t=" + std::to_string(t);
    const Matrix B = p.B(t);
    if (B.rows() != M || B.cols() != m) throw InvalidArgument("B must be M x m" + at);
    const Matrix Q = p.Q(t);
    if (Q.rows() != M || Q.cols() != M) throw InvalidArgument("Q must be M x M" + at);
    const Matrix R = p.R(t);
    if (R.rows() != m || R.cols() != m) throw InvalidArgument("R must be m x m" + at);
    if (!B.allFinite() || !Q.allFinite() || !R.allFinite()) throw InvalidArgument("non-finite coefficient" + at);
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, Q.cwiseAbs().maxCoeff()))
        throw InvalidArgument("Q must be symmetric" + at);
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, R.cwiseAbs().maxCoeff()))
        throw InvalidArgument("R must be symmetric" + at);
    if (min_eigenvalue(symmetrize(Q)) < -psd_tolerance(Q)) throw InvalidArgument("Q must be positive semidefinite" + at);
    const Matrix shifted = symmetrize(R) - p.delta * Matrix::Identity(m, m);
    if (min_eigenvalue(shifted) < -psd_tolerance(R))
        throw InvalidArgument("R must satisfy R >= delta I with delta > 0 (strict positivity)" + at);
    const auto D = p.control_noise(t);
    if (static_cast<int>(D.size()) > p.basis.noise_channels())
        throw InvalidArgument("more control-noise operators than noise channels" + at);
    for (const auto& d : D)
        if (d.rows() != M || d.cols() != m || !d.allFinite()) throw InvalidArgument("D_j must be finite M x m" + at);
}

}  // namespace

void RiccatiProblem::validate(const GradedTimeGrid* grid) const {
    if (basis.modes() < 1) throw InvalidArgument("basis has no modes");
    if (control_dim < 1) throw InvalidArgument("control dimension must be positive");
    if (!B || !Q || !R) throw InvalidArgument("B, Q and R must be given");
    if (!(delta > 0.0)) throw InvalidArgument("delta must be positive: R >= delta I with delta > 0 (strict positivity)");
    if (!(alpha >= 0.0 && alpha < 0.5)) throw InvalidArgument("alpha must lie in [0, 1/2)");
    if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
    if (G.dim() != basis.modes()) throw InvalidArgument("G must be M x M");
    if (G.min_eigenvalue() < -psd_tolerance(G.matrix())) throw InvalidArgument("G must be positive semidefinite");
    if (tail_bound > tail_limit) throw InvalidArgument("control-noise tail bound exceeds its admissible constant");
    check_at(*this, 0.0);
    check_at(*this, horizon);
    if (grid != nullptr)
        for (double t : grid->nodes()) check_at(*this, t);
}

LambdaResult lambda_operator(const RiccatiProblem& prob, double t, const Matrix& P) {
    const int m = prob.control_dim;
    const Matrix B = prob.B(t);
    const auto D = prob.control_noise(t);
    Matrix lam = prob.R(t);
    Matrix coupling = B.transpose() * P;
    for (std::size_t j = 0; j < D.size(); ++j) {
        const Matrix dp = D[j].transpose() * P;
        lam += dp * D[j];
        coupling += dp * prob.basis.multiplier(static_cast<int>(j));
    }
    lam = symmetrize(lam);
    const double lo = min_eigenvalue(lam);
    if (!(lo >= 0.5 * prob.delta))
        throw NumericalPsdError("Lambda has eigenvalue " + std::to_string(lo) + " below delta/2 at t=" + std::to_string(t));
    LambdaResult r;
    r.gain = -lam.llt().solve(coupling);
    r.Lambda = SymOperator(lam);
    r.coupling = std::move(coupling);
    if (prob.tail_bound > 0.0) r.tail_estimate = std::sqrt(prob.tail_bound * spectral_norm(P));
    (void)m;
    return r;
}

const Matrix& GainPath::lookup(double t) const {
    const int k = std::min(grid.interval_of(t), grid.intervals() - 1);
    return gains.at(static_cast<std::size_t>(k));
}

LyapunovData linearized_data(const RiccatiProblem& prob, const OperatorPath& previous) {
    LyapunovData d;
    d.basis = prob.basis;
    d.horizon = prob.horizon;
    d.alpha = prob.alpha;
    d.terminal = prob.G;
    d.coefficients = [&prob, &previous](double t) {
        const Matrix P = previous.evaluate(t);
        const auto lr = lambda_operator(prob, t, P);
        const auto D = prob.control_noise(t);
        LyapunovCoefficients c;
        c.drift = prob.B(t) * lr.gain;
        c.channels = prob.basis.multipliers();
        for (std::size_t j = 0; j < D.size(); ++j) c.channels[j] += D[j] * lr.gain;
        c.source = symmetrize(prob.Q(t) + lr.gain.transpose() * prob.R(t) * lr.gain);
        return c;
    };
    return d;
}

Matrix riccati_integrand(const RiccatiProblem& prob, double t, const Matrix& P) {
    const auto lr = lambda_operator(prob, t, P);
    Matrix g = kernels::channel_sum(prob.basis.multipliers(), P) + prob.Q(t);
    g += lr.coupling.transpose() * lr.gain;  // -lambda* Lambda lambda = S* lambda
    return symmetrize(g);
}

GainPath gain_path(const RiccatiProblem& prob, const OperatorPath& path) {
    GainPath gp;
    gp.grid = path.grid();
    for (int k = 0; k <= gp.grid.intervals(); ++k) {
        auto lr = lambda_operator(prob, gp.grid[k], path.value(k).matrix());
        gp.gains.push_back(std::move(lr.gain));
        gp.lambdas.push_back(std::move(lr.Lambda));
    }
    return gp;
}

namespace {

double form_residual(const RiccatiProblem& prob, const OperatorPath& path) {
    const auto& pieces = path.pieces();
    if (pieces.empty()) return 0.0;
    std::mt19937_64 rng(0x5eed);
    std::uniform_int_distribution<std::size_t> pick_piece(0, pieces.size() - 1);
    std::uniform_int_distribution<int> pick_stage(0, collocation::kStages - 1);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const auto& pc = pieces[pick_piece(rng)];
        const int m = pick_stage(rng);
        const double t = pc.a + collocation::stage_nodes()[static_cast<std::size_t>(m)] * (pc.b - pc.a);
        const Matrix& P = pc.stage_values[static_cast<std::size_t>(m)];
        const Matrix diff = pc.sources[static_cast<std::size_t>(m)] - riccati_integrand(prob, t, P);
        const double scale = 1.0 + spectral_norm(P);
        worst = std::max(worst, diff.cwiseAbs().maxCoeff() / (scale * scale));
    }
    return worst;
}

}  // namespace

RiccatiSolution quasi_linearize(const RiccatiProblem& prob, const GradedTimeGrid& grid, const RiccatiSettings& settings) {
    prob.validate(&grid);
    if (!(settings.tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    if (settings.max_outer < 1) throw InvalidArgument("max_outer must be at least 1");

    RiccatiSolution sol;
    OperatorPath prev = OperatorPath::zero(grid, prob.basis.modes());
    bool converged = false;
    for (int n = 1; n <= settings.max_outer; ++n) {
        const LyapunovData data = linearized_data(prob, prev);
        OperatorPath cur = solve_lyapunov(data, grid, settings.lyapunov);
        for (const auto& v : cur.values()) {
            const double scale = std::max(1.0, v.norm());
            sol.positivity_worst = std::min(sol.positivity_worst, v.min_eigenvalue() / scale);
        }
        if (n >= 2) {
            for (std::size_t k = 0; k < cur.values().size(); ++k) {
                const Matrix& a = prev.values()[k].matrix();
                const double scale = std::max(1.0, prev.values()[k].norm());
                sol.monotonicity_worst = std::min(sol.monotonicity_worst, min_eigenvalue(symmetrize(a - cur.values()[k].matrix())) / scale);
            }
            if (sol.monotonicity_worst < -settings.psd_slack)
                throw InternalConsistencyError("quasi-linearized iterates are not non-increasing: eigenvalue " +
                                               std::to_string(sol.monotonicity_worst) + " at iteration " +
                                               std::to_string(n));
        }
        if (sol.positivity_worst < -settings.psd_slack)
            throw InternalConsistencyError("quasi-linearized iterate lost positivity: eigenvalue " +
                                           std::to_string(sol.positivity_worst));
        const double dist = sup_distance(cur, prev);
        sol.history.push_back(dist);
        sol.initial_values.push_back(cur.front());
        sol.iterations = n;
        if (settings.keep_iterates) sol.iterates.push_back(cur);
        const double scale = std::max(1.0, cur.sup_norm());
        prev = std::move(cur);
        if (dist <= settings.tol * scale) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NonConvergenceError("quasi-linearization did not reach tol=" + std::to_string(settings.tol) + " in " +
                                      std::to_string(settings.max_outer) + " iterations",
                                  sol.history);
    sol.path = std::move(prev);
    sol.gains = gain_path(prob, sol.path);
    sol.form_residual = form_residual(prob, sol.path);
    return sol;
}

OperatorPath direct_riccati_oracle(const RiccatiProblem& prob, int fine_steps, double tol) {
    prob.validate();
    const int M = prob.basis.modes();
    if (M > 16) throw InvalidArgument("direct oracle is limited to M <= 16");
    if (fine_steps < 2) throw InvalidArgument("fine_steps must be at least 2");
    const GradedTimeGrid grid = graded_grid(prob.horizon, fine_steps, 0.0);
    const double T = prob.horizon;
    const auto& eigs = prob.basis.eigenvalues();

    using State = std::vector<double>;
    auto rhs = [&](const State& x, State& dxdtau, double tau) {
        const Eigen::Map<const Matrix> P0(x.data(), M, M);
        const Matrix P = symmetrize(P0);
        Matrix d = riccati_integrand(prob, T - tau, P);
        for (int k = 0; k < M; ++k)
            for (int l = 0; l < M; ++l) d(k, l) += (eigs[static_cast<std::size_t>(k)] + eigs[static_cast<std::size_t>(l)]) * P(k, l);
        dxdtau.assign(d.data(), d.data() + d.size());
    };
    std::vector<double> taus;
    for (int k = grid.intervals(); k >= 0; --k) taus.push_back(T - grid[k]);
    taus.front() = 0.0;

    State x(prob.G.matrix().data(), prob.G.matrix().data() + static_cast<std::ptrdiff_t>(M) * M);
    std::vector<SymOperator> values(taus.size());
    std::size_t idx = 0;
    auto observer = [&](const State& s, double) {
        const Eigen::Map<const Matrix> P(s.data(), M, M);
        if (!P.allFinite()) throw SingularityError("direct Riccati integration produced non-finite values");
        values[values.size() - 1 - idx] = SymOperator(symmetrize(P), 1e-6);
        ++idx;
    };
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_controlled(tol, tol, ode::runge_kutta_dopri5<State>());
    try {
        ode::integrate_times(stepper, rhs, x, taus.begin(), taus.end(), 1e-6 * T, observer);
    } catch (const NumericalError&) {
        throw;
    } catch (const std::runtime_error& e) {
        throw SingularityError(std::string("direct Riccati integration failed: ") + e.what());
    }
    return OperatorPath(grid, std::move(values), Interpolation::linear);
}

Matrix completion_form(const RiccatiProblem& prob, double t, const Matrix& K, const Matrix& P) {
    const Matrix BK = prob.B(t) * K;
    const auto D = prob.control_noise(t);
    Matrix f = BK.transpose() * P + P * BK + K.transpose() * prob.R(t) * K;
    for (int j = 0; j < prob.basis.noise_channels(); ++j) {
        Matrix c = prob.basis.multiplier(j);
        if (static_cast<std::size_t>(j) < D.size()) c += D[static_cast<std::size_t>(j)] * K;
        f += c.transpose() * P * c;
    }
    return f;
}

double completion_identity_check(const RiccatiProblem& prob, const Matrix& P, const Matrix& K, double t) {
    const auto lr = lambda_operator(prob, t, P);
    const Matrix dk = K - lr.gain;
    const Matrix lhs = completion_form(prob, t, K, P);
    const Matrix rhs = completion_form(prob, t, lr.gain, P) + dk.transpose() * lr.Lambda.matrix() * dk;
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

}  // namespace spdelq
