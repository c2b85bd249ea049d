#include "spdelq/operator_path.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "spdelq/csv.hpp"
#include "spdelq/errors.hpp"

namespace spdelq {

const char* to_string(Interpolation rule) {
    switch (rule) {
        case Interpolation::piecewise_constant: return "piecewise_constant";
        case Interpolation::linear: return "linear";
        case Interpolation::collocation: return "collocation";
    }
    return "unknown";
}

OperatorPath::OperatorPath(GradedTimeGrid grid, std::vector<SymOperator> values, Interpolation rule)
    : grid_(std::move(grid)), values_(std::move(values)), rule_(rule) {
    if (static_cast<int>(values_.size()) != grid_.intervals() + 1)
        throw InvalidArgument("operator path needs one value per grid node");
    for (const auto& v : values_)
        if (v.dim() != values_.front().dim()) throw InvalidArgument("operator path values differ in dimension");
    if (rule_ == Interpolation::collocation)
        throw InvalidArgument("collocation interpolation requires dense pieces");
}

OperatorPath::OperatorPath(GradedTimeGrid grid, std::vector<SymOperator> values, std::vector<double> eigenvalues,
                           std::vector<DensePiece> pieces)
    : OperatorPath(std::move(grid), std::move(values), Interpolation::linear) {
    rule_ = Interpolation::collocation;
    eigenvalues_ = std::move(eigenvalues);
    pieces_ = std::move(pieces);
    if (pieces_.empty()) throw InvalidArgument("dense path without pieces");
}

OperatorPath OperatorPath::zero(const GradedTimeGrid& grid, int dim) {
    return OperatorPath(grid, std::vector<SymOperator>(static_cast<std::size_t>(grid.intervals() + 1), SymOperator::zero(dim)));
}

const DensePiece& OperatorPath::piece_at(double t) const {
    if (pieces_.empty()) throw InvalidArgument("path has no dense pieces");
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                               [](double v, const DensePiece& p) { return v < p.a; });
    if (it != pieces_.begin()) --it;
    return *it;
}

Matrix OperatorPath::evaluate(double t) const {
    const auto& nodes = grid_.nodes();
    if (t <= nodes.front()) return values_.front().matrix();
    if (t >= nodes.back()) return values_.back().matrix();
    const int k = grid_.interval_of(t);
    const double a = nodes[static_cast<std::size_t>(k)];
    const double b = nodes[static_cast<std::size_t>(k) + 1];
    if (t == a) return values_[static_cast<std::size_t>(k)].matrix();
    switch (rule_) {
        case Interpolation::piecewise_constant:
            return values_[static_cast<std::size_t>(k)].matrix();
        case Interpolation::linear: {
            const double w = (t - a) / (b - a);
            return (1.0 - w) * values_[static_cast<std::size_t>(k)].matrix() +
                   w * values_[static_cast<std::size_t>(k) + 1].matrix();
        }
        case Interpolation::collocation: break;
    }
    const DensePiece& p = piece_at(t);
    if (t == p.b) return p.right;
    const double h = p.b - p.a;
    const double c = (t - p.a) / h;
    const auto& cs = collocation::stage_nodes();
    for (int m = 0; m < collocation::kStages; ++m)
        if (std::abs(c - cs[static_cast<std::size_t>(m)]) <= 1e-13) return p.stage_values[static_cast<std::size_t>(m)];
    const auto w = collocation::point_weights(eigenvalues_, h, c);
    return symmetrize(collocation::apply(w, p.right, p.sources));
}

double OperatorPath::sup_norm() const {
    double s = 0.0;
    for (const auto& v : values_) s = std::max(s, v.norm());
    return s;
}

void OperatorPath::write_csv(std::ostream& os) const {
    const int n = dim();
    std::vector<std::string> cols{"t"};
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) cols.push_back("p_" + std::to_string(i) + "_" + std::to_string(j));
    csv::write_header(os, cols);
    std::vector<double> row;
    for (std::size_t k = 0; k < values_.size(); ++k) {
        row.clear();
        row.push_back(grid_.nodes()[k]);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) row.push_back(values_[k](i, j));
        csv::write_row(os, row);
    }
}

std::string OperatorPath::to_json() const {
    nlohmann::ordered_json j;
    j["dim"] = dim();
    j["interpolation"] = to_string(rule_);
    j["grid_gamma"] = grid_.gamma();
    j["times"] = grid_.nodes();
    auto vals = nlohmann::ordered_json::array();
    for (const auto& v : values_) {
        auto rows = nlohmann::ordered_json::array();
        for (int i = 0; i < v.dim(); ++i) {
            std::vector<double> r(static_cast<std::size_t>(v.dim()));
            for (int c = 0; c < v.dim(); ++c) r[static_cast<std::size_t>(c)] = v(i, c);
            rows.push_back(r);
        }
        vals.push_back(rows);
    }
    j["values"] = vals;
    return j.dump();
}

double sup_distance(const OperatorPath& a, const OperatorPath& b) {
    if (a.values().size() != b.values().size() || a.dim() != b.dim())
        throw InvalidArgument("paths are not on the same grid");
    double s = 0.0;
    for (std::size_t k = 0; k < a.values().size(); ++k)
        s = std::max(s, spectral_norm(a.values()[k].matrix() - b.values()[k].matrix()));
    return s;
}

}  // namespace spdelq
