#pragma once

#include <Eigen/Dense>

namespace spdelq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Symmetric real matrix representing a self-adjoint operator in the spectral basis.
///
/// Construction checks symmetry to a relative tolerance and then stores the exact
/// symmetric part, so downstream eigen-solvers see a bit-symmetric matrix.
class SymOperator {
public:
    static constexpr double kSymmetryTolerance = 1e-10;

    SymOperator() = default;
    explicit SymOperator(const Matrix& m, double tol = kSymmetryTolerance);

    static SymOperator zero(int dim);
    static SymOperator identity(int dim, double scale = 1.0);

    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    const Matrix& matrix() const noexcept { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }

    double min_eigenvalue() const;
    double max_eigenvalue() const;
    /// Spectral norm (largest absolute eigenvalue).
    double norm() const;
    double max_abs() const { return m_.size() == 0 ? 0.0 : m_.cwiseAbs().maxCoeff(); }
    bool is_psd(double eps) const { return dim() == 0 || min_eigenvalue() >= -eps; }

    double quadratic_form(const Vector& x) const { return x.dot(m_ * x); }

private:
    Matrix m_;
};

/// Exact symmetric part (A + A^T)/2.
inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

double min_eigenvalue(const Matrix& symmetric);
double spectral_norm(const Matrix& a);

}  // namespace spdelq
