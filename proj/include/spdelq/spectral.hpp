#pragma once

#include <span>
#include <vector>

#include "spdelq/sym_operator.hpp"

namespace spdelq {

/// Galerkin workspace: retained Dirichlet-Laplacian modes and noise-channel multipliers.
///
/// The generator A is diagonal with entries `eigenvalues()`; channel j acts on the
/// retained modes through the symmetric matrix `multiplier(j)`.
class SpectralBasis {
public:
    enum class Kind { anderson, custom };

    SpectralBasis() = default;

    /// Arbitrary diagonal generator with user-supplied symmetric channel matrices.
    /// Eigenvalues must be negative and strictly decreasing.
    SpectralBasis(std::vector<double> eigenvalues, std::vector<Matrix> multipliers);

    int modes() const noexcept { return static_cast<int>(eigenvalues_.size()); }
    int noise_channels() const noexcept { return static_cast<int>(multipliers_.size()); }
    Kind kind() const noexcept { return kind_; }
    double noise_scale() const noexcept { return noise_scale_; }

    const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
    const Matrix& multiplier(int j) const { return multipliers_.at(static_cast<std::size_t>(j)); }
    const std::vector<Matrix>& multipliers() const noexcept { return multipliers_; }

    /// Copy keeping only the first `n` channels.
    SpectralBasis truncated(int n) const;
    /// Copy with every multiplier scaled by `factor` (noise intensity knob).
    SpectralBasis scaled(double factor) const;

    friend SpectralBasis build_anderson_basis(int modes, int noise_channels);

private:
    std::vector<double> eigenvalues_;
    std::vector<Matrix> multipliers_;
    Kind kind_ = Kind::custom;
    double noise_scale_ = 1.0;
};

/// Sine basis e_n(y) = sqrt(2) sin(n pi y) on [0,1]: mu_k = -(k pi)^2 and
/// (C_j)_{kl} = int_0^1 e_j e_k e_l dy from the closed-form triple product.
SpectralBasis build_anderson_basis(int modes, int noise_channels);

/// Closed-form int_0^1 e_j e_k e_l dy for the sine basis (1-based indices).
double sine_triple_product(int j, int k, int l);

/// Entries exp(mu_k t) X_kl exp(mu_l t), i.e. e^{A* t} X e^{A t}.
Matrix semigroup_sandwich(std::span<const double> eigenvalues, double t, const Matrix& x);
SymOperator semigroup_sandwich(const SpectralBasis& basis, double t, const SymOperator& x);

struct Ac0Report {
    double fitted_exponent = 0.0;
    /// exp(intercept) of the log-log fit.
    double prefactor = 0.0;
    /// max over samples of S(t) t^{2 alpha}; finite iff the sampled bound holds.
    double constant = 0.0;
    bool passed = false;
    std::vector<double> times;
    std::vector<double> values;
};

/// Samples S(t) = sup_{|x|=1} sum_j |e^{At} C_j x|^2 and fits log S against log t.
/// Passes when the slope is at least -2 alpha - margin.
Ac0Report verify_ac0(const SpectralBasis& basis, std::span<const double> t_samples, double alpha,
                     double margin = 0.15);

/// Same, for a fixed probe vector x instead of the supremum over unit vectors.
Ac0Report verify_ac0(const SpectralBasis& basis, std::span<const double> t_samples, double alpha,
                     const Vector& probe, double margin = 0.15);

/// Time nodes t_k = T (1 - (1 - k/K)^gamma), gamma = max(1, 1/(1 - 2 alpha)).
class GradedTimeGrid {
public:
    GradedTimeGrid() = default;

    double horizon() const noexcept { return nodes_.empty() ? 0.0 : nodes_.back() - nodes_.front(); }
    double start() const noexcept { return nodes_.front(); }
    double end() const noexcept { return nodes_.back(); }
    int intervals() const noexcept { return static_cast<int>(nodes_.size()) - 1; }
    double gamma() const noexcept { return gamma_; }
    const std::vector<double>& nodes() const noexcept { return nodes_; }
    double operator[](int k) const { return nodes_[static_cast<std::size_t>(k)]; }

    /// Index k with nodes[k] <= t < nodes[k+1]; t >= end() maps to the last interval.
    int interval_of(double t) const;

    /// Grid on [offset, offset + T]; used to place a graded grid on a sub-window.
    GradedTimeGrid shifted(double offset) const;

    friend GradedTimeGrid graded_grid(double horizon, int intervals, double alpha);

private:
    std::vector<double> nodes_;
    double gamma_ = 1.0;
};

GradedTimeGrid graded_grid(double horizon, int intervals, double alpha);

}  // namespace spdelq
