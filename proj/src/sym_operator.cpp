#include "spdelq/sym_operator.hpp"

#include <cmath>
#include <string>

#include "spdelq/errors.hpp"

namespace spdelq {

SymOperator::SymOperator(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) {
        throw InvalidArgument("SymOperator: matrix is not square");
    }
    if (!m.allFinite()) {
        throw InvalidArgument("SymOperator: matrix has non-finite entries");
    }
    const double scale = std::max(1.0, m.size() ? m.cwiseAbs().maxCoeff() : 0.0);
    const double asym = m.size() ? (m - m.transpose()).cwiseAbs().maxCoeff() : 0.0;
    if (asym > tol * scale) {
        throw InvalidArgument("SymOperator: asymmetry " + std::to_string(asym) +
                              " exceeds tolerance");
    }
    m_ = symmetrize(m);
}

SymOperator SymOperator::zero(int dim) { return SymOperator(Matrix::Zero(dim, dim)); }

SymOperator SymOperator::identity(int dim, double scale) {
    return SymOperator(scale * Matrix::Identity(dim, dim));
}

double SymOperator::min_eigenvalue() const { return spdelq::min_eigenvalue(m_); }

double SymOperator::max_eigenvalue() const {
    if (dim() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(dim() - 1);
}

double SymOperator::norm() const {
    if (dim() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double min_eigenvalue(const Matrix& symmetric) {
    if (symmetric.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double spectral_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    if (a.rows() == 1 || a.cols() == 1) return a.norm();
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

}  // namespace spdelq
