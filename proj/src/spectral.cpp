#include "spdelq/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spdelq/errors.hpp"
#include "spdelq/stats.hpp"

namespace spdelq {

namespace {

// int_0^1 sin(n pi y) dy, n may be negative or zero.
double sine_integral(int n) {
    if (n % 2 == 0) return 0.0;
    return 2.0 / (static_cast<double>(n) * std::numbers::pi);
}

void check_multipliers(int modes, const std::vector<Matrix>& multipliers) {
    for (const auto& c : multipliers) {
        if (c.rows() != modes || c.cols() != modes) {
            throw InvalidArgument("SpectralBasis: multiplier dimension does not match mode count");
        }
        const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
        if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw InvalidArgument("SpectralBasis: multiplier matrices must be symmetric");
        }
    }
}

}  // namespace

SpectralBasis::SpectralBasis(std::vector<double> eigenvalues, std::vector<Matrix> multipliers)
    : eigenvalues_(std::move(eigenvalues)), multipliers_(std::move(multipliers)) {
    if (eigenvalues_.empty()) throw InvalidArgument("SpectralBasis: need at least one mode");
    for (std::size_t k = 0; k < eigenvalues_.size(); ++k) {
        if (!(eigenvalues_[k] < 0.0)) {
            throw InvalidArgument("SpectralBasis: eigenvalues must be negative");
        }
        if (k > 0 && !(eigenvalues_[k] < eigenvalues_[k - 1])) {
            throw InvalidArgument("SpectralBasis: eigenvalues must be strictly decreasing");
        }
    }
    check_multipliers(modes(), multipliers_);
    for (auto& c : multipliers_) c = symmetrize(c);
}

SpectralBasis SpectralBasis::truncated(int n) const {
    if (n < 0 || n > noise_channels()) {
        throw InvalidArgument("SpectralBasis::truncated: channel count out of range");
    }
    SpectralBasis out = *this;
    out.multipliers_.resize(static_cast<std::size_t>(n));
    return out;
}

SpectralBasis SpectralBasis::scaled(double factor) const {
    SpectralBasis out = *this;
    for (auto& c : out.multipliers_) c *= factor;
    out.noise_scale_ *= factor;
    return out;
}

double sine_triple_product(int j, int k, int l) {
    // sin a sin b sin c = (sin(a+b-c) + sin(a-b+c) + sin(-a+b+c) - sin(a+b+c)) / 4
    const double s = sine_integral(j + k - l) + sine_integral(j - k + l) +
                     sine_integral(-j + k + l) - sine_integral(j + k + l);
    return 0.5 * std::numbers::sqrt2 * s;
}

SpectralBasis build_anderson_basis(int modes, int noise_channels) {
    if (modes < 1) throw InvalidArgument("build_anderson_basis: mode count must be positive");
    if (noise_channels < 1) {
        throw InvalidArgument("build_anderson_basis: noise channel count must be positive");
    }
    SpectralBasis b;
    b.kind_ = SpectralBasis::Kind::anderson;
    b.eigenvalues_.resize(static_cast<std::size_t>(modes));
    for (int k = 1; k <= modes; ++k) {
        const double w = k * std::numbers::pi;
        b.eigenvalues_[static_cast<std::size_t>(k - 1)] = -w * w;
    }
    b.multipliers_.reserve(static_cast<std::size_t>(noise_channels));
    for (int j = 1; j <= noise_channels; ++j) {
        Matrix c(modes, modes);
        for (int k = 1; k <= modes; ++k) {
            for (int l = k; l <= modes; ++l) {
                const double v = sine_triple_product(j, k, l);
                c(k - 1, l - 1) = v;
                c(l - 1, k - 1) = v;
            }
        }
        b.multipliers_.push_back(std::move(c));
    }
    return b;
}

Matrix semigroup_sandwich(std::span<const double> eigenvalues, double t, const Matrix& x) {
    if (t < 0.0) throw InvalidArgument("semigroup_sandwich: negative time");
    const auto n = static_cast<Eigen::Index>(eigenvalues.size());
    if (x.rows() != n || x.cols() != n) {
        throw InvalidArgument("semigroup_sandwich: operator dimension does not match basis");
    }
    Vector e(n);
    for (Eigen::Index k = 0; k < n; ++k) e(k) = std::exp(eigenvalues[static_cast<std::size_t>(k)] * t);
    return e.asDiagonal() * x * e.asDiagonal();
}

SymOperator semigroup_sandwich(const SpectralBasis& basis, double t, const SymOperator& x) {
    return SymOperator(semigroup_sandwich(basis.eigenvalues(), t, x.matrix()));
}

namespace {

Ac0Report finish_ac0(std::span<const double> t_samples, std::vector<double> values, double alpha,
                     double margin) {
    Ac0Report r;
    r.times.assign(t_samples.begin(), t_samples.end());
    r.values = std::move(values);
    const LineFit fit = fit_loglog(r.times, r.values);
    r.fitted_exponent = fit.slope;
    r.prefactor = std::isfinite(fit.intercept) ? std::exp(fit.intercept) : 0.0;
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        r.constant = std::max(r.constant, r.values[i] * std::pow(r.times[i], 2.0 * alpha));
    }
    r.passed = std::isfinite(r.constant) && r.fitted_exponent >= -2.0 * alpha - margin;
    return r;
}

void check_ac0_inputs(std::span<const double> t_samples, double alpha) {
    if (t_samples.empty()) throw InvalidArgument("verify_ac0: empty sample list");
    for (double t : t_samples) {
        if (!(t > 0.0)) throw InvalidArgument("verify_ac0: sample times must be positive");
    }
    if (!(alpha > 0.0 && alpha < 0.5)) throw InvalidArgument("verify_ac0: alpha must lie in (0, 1/2)");
}

}  // namespace

Ac0Report verify_ac0(const SpectralBasis& basis, std::span<const double> t_samples, double alpha,
                     double margin) {
    check_ac0_inputs(t_samples, alpha);
    const int m = basis.modes();
    std::vector<double> values;
    values.reserve(t_samples.size());
    for (double t : t_samples) {
        Vector e2(m);
        for (int k = 0; k < m; ++k) e2(k) = std::exp(2.0 * basis.eigenvalues()[static_cast<std::size_t>(k)] * t);
        Matrix s = Matrix::Zero(m, m);
        for (const auto& c : basis.multipliers()) s.noalias() += c.transpose() * e2.asDiagonal() * c;
        Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s), Eigen::EigenvaluesOnly);
        values.push_back(std::max(0.0, es.eigenvalues()(m - 1)));
    }
    return finish_ac0(t_samples, std::move(values), alpha, margin);
}

Ac0Report verify_ac0(const SpectralBasis& basis, std::span<const double> t_samples, double alpha,
                     const Vector& probe, double margin) {
    check_ac0_inputs(t_samples, alpha);
    const int m = basis.modes();
    if (probe.size() != m) throw InvalidArgument("verify_ac0: probe dimension does not match basis");
    std::vector<double> values;
    values.reserve(t_samples.size());
    for (double t : t_samples) {
        Vector e(m);
        for (int k = 0; k < m; ++k) e(k) = std::exp(basis.eigenvalues()[static_cast<std::size_t>(k)] * t);
        double s = 0.0;
        for (const auto& c : basis.multipliers()) s += (e.asDiagonal() * (c * probe)).squaredNorm();
        values.push_back(s);
    }
    return finish_ac0(t_samples, std::move(values), alpha, margin);
}

GradedTimeGrid graded_grid(double horizon, int intervals, double alpha) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw InvalidArgument("graded_grid: horizon must be positive");
    }
    if (intervals < 2) throw InvalidArgument("graded_grid: need at least two intervals");
    if (!(alpha >= 0.0 && alpha < 0.5)) throw InvalidArgument("graded_grid: alpha must lie in [0, 1/2)");
    GradedTimeGrid g;
    g.gamma_ = std::max(1.0, 1.0 / (1.0 - 2.0 * alpha));
    g.nodes_.resize(static_cast<std::size_t>(intervals) + 1);
    for (int k = 0; k <= intervals; ++k) {
        const double r = 1.0 - static_cast<double>(k) / intervals;
        g.nodes_[static_cast<std::size_t>(k)] = horizon * (1.0 - std::pow(r, g.gamma_));
    }
    g.nodes_.front() = 0.0;
    g.nodes_.back() = horizon;
    return g;
}

int GradedTimeGrid::interval_of(double t) const {
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    const auto k = static_cast<int>(it - nodes_.begin()) - 1;
    return std::clamp(k, 0, intervals() - 1);
}

GradedTimeGrid GradedTimeGrid::shifted(double offset) const {
    GradedTimeGrid g = *this;
    for (auto& t : g.nodes_) t += offset;
    return g;
}

}  // namespace spdelq
