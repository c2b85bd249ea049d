#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "spdelq/collocation.hpp"
#include "spdelq/spectral.hpp"
#include "spdelq/sym_operator.hpp"

namespace spdelq {

enum class Interpolation {
    /// P(t) = P(t_k) on [t_k, t_{k+1}).
    piecewise_constant,
    linear,
    /// Continuous extension of the collocation step (only for solver output).
    collocation,
};

const char* to_string(Interpolation rule);

/// One collocation step on [a, b]: the right value, the source g at the stages and the
/// solution at the stages. Enough to evaluate P anywhere in [a, b].
struct DensePiece {
    double a = 0.0;
    double b = 0.0;
    Matrix right;
    std::array<Matrix, collocation::kStages> sources;
    std::array<Matrix, collocation::kStages> stage_values;
};

/// Time-indexed family of symmetric operators on a grid.
class OperatorPath {
public:
    OperatorPath() = default;
    OperatorPath(GradedTimeGrid grid, std::vector<SymOperator> values,
                 Interpolation rule = Interpolation::piecewise_constant);
    /// Solver output. `pieces` must tile [start, end] in increasing order.
    OperatorPath(GradedTimeGrid grid, std::vector<SymOperator> values, std::vector<double> eigenvalues,
                 std::vector<DensePiece> pieces);

    static OperatorPath zero(const GradedTimeGrid& grid, int dim);

    const GradedTimeGrid& grid() const noexcept { return grid_; }
    const std::vector<SymOperator>& values() const noexcept { return values_; }
    const SymOperator& value(int k) const { return values_.at(static_cast<std::size_t>(k)); }
    const SymOperator& front() const { return values_.front(); }
    int dim() const noexcept { return values_.empty() ? 0 : values_.front().dim(); }
    Interpolation interpolation() const noexcept { return rule_; }
    const std::vector<DensePiece>& pieces() const noexcept { return pieces_; }
    const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }

    /// P(t); exact node value when t is a grid node.
    Matrix evaluate(double t) const;
    /// Piece containing t (collocation paths only).
    const DensePiece& piece_at(double t) const;

    /// max_k |P(t_k)|_2
    double sup_norm() const;

    /// One row per node: t, then the row-major upper triangle.
    void write_csv(std::ostream& os) const;
    std::string to_json() const;

private:
    GradedTimeGrid grid_;
    std::vector<SymOperator> values_;
    Interpolation rule_ = Interpolation::piecewise_constant;
    std::vector<double> eigenvalues_;
    std::vector<DensePiece> pieces_;
};

/// max over shared nodes of the spectral norm of the difference.
double sup_distance(const OperatorPath& a, const OperatorPath& b);

}  // namespace spdelq
