#include <cmath>
#include <cstring>
#include <sstream>

#include "doctest.h"
#include "spdelq/errors.hpp"
#include "spdelq/lyapunov.hpp"
#include "spdelq/riccati.hpp"
#include "spdelq/simulator.hpp"

using namespace spdelq;

namespace {

RiccatiProblem small_anderson(int M, double T) {
    const auto basis = build_anderson_basis(M, M);
    const Matrix I = Matrix::Identity(M, M);
    return RiccatiProblem::constant(basis, I, {}, I, I, SymOperator::identity(M), 1e-3, 0.25, T);
}

}  // namespace

TEST_CASE("uncontrolled cost equals the Lyapunov quadratic form") {
    const auto prob = small_anderson(4, 0.1);
    const auto grid = graded_grid(0.1, 40, 0.25);
    const auto data = LyapunovData::uncontrolled(prob.basis, 0.1, 0.25, prob.Q(0.0), prob.G);
    const auto path = solve_lyapunov(data, grid);
    Vector x0 = Vector::Zero(4);
    x0(0) = 1.0;
    x0(2) = -0.5;
    MCConfig mc;
    mc.paths = 4000;
    mc.steps = 4;
    const auto policy = ControlPolicy::zero(1 * 4);
    const auto cost = estimate_cost(prob, simulate_paths(prob, grid, x0, policy, mc), policy);
    const double exact = path.front().quadratic_form(x0);
    CHECK(std::abs(cost.estimate - exact) <= 3.0 * cost.ci_halfwidth + 5e-3 * exact);
    CHECK(cost.running_control_term == 0.0);
}

TEST_CASE("value identity on a small instance") {
    const auto prob = small_anderson(4, 0.1);
    const auto grid = graded_grid(0.1, 40, 0.25);
    const auto sol = quasi_linearize(prob, grid);
    Vector x0 = Vector::Zero(4);
    x0(0) = 1.0;
    MCConfig mc;
    mc.paths = 2000;
    mc.steps = 2;
    const auto opt = verify_value_identity(prob, sol, x0, ControlPolicy::feedback(sol.gains), mc);
    CHECK(opt.passed);
    // Only the gap between piecewise-constant gains and the dense path remains.
    CHECK(std::abs(opt.rhs) < 1e-4 * opt.value);
    const Matrix E = Matrix::Constant(4, 4, 0.3);
    const auto pert = verify_value_identity(prob, sol, x0, ControlPolicy::feedback(sol.gains, E), mc);
    CHECK(pert.passed);
    CHECK(pert.rhs > 0.0);
    CHECK(pert.path_costs.size() == 2000);
}

TEST_CASE("moment bound and moment output") {
    const auto prob = small_anderson(3, 0.1);
    const auto grid = graded_grid(0.1, 10, 0.25);
    Vector x0 = Vector::Ones(3);
    MCConfig mc;
    mc.paths = 100;
    mc.store_states = true;
    const auto ens = simulate_paths(prob, grid, x0, ControlPolicy::zero(3), mc);
    const double c = moment_bound_constant(ens, x0);
    CHECK(std::isfinite(c));
    CHECK(c > 0.0);
    CHECK(c < 10.0);
    std::ostringstream os;
    write_moment_csv(os, ens);
    CHECK(os.str().rfind("t,", 0) == 0);
    std::ostringstream bin;
    write_binary_dump(bin, ens);
    const std::string b = bin.str();
    REQUIRE(b.size() > 24);
    CHECK(b.substr(0, 4) == "LQSP");
    std::uint64_t paths = 0;
    std::memcpy(&paths, b.data() + 12, 8);
    CHECK(paths == 100);
    CHECK(b.size() == 28 + 8 * 100 * ens.data.times.size() * 3);
}

TEST_CASE("simulator rejects bad input") {
    const auto prob = small_anderson(3, 0.1);
    const auto grid = graded_grid(0.1, 10, 0.25);
    MCConfig mc;
    mc.paths = 0;
    CHECK_THROWS_AS(simulate_paths(prob, grid, Vector::Ones(3), ControlPolicy::zero(3), mc), InvalidArgument);
    mc.paths = 10;
    CHECK_THROWS_AS(simulate_paths(prob, grid, Vector::Ones(2), ControlPolicy::zero(3), mc), InvalidArgument);
    CHECK_THROWS_AS(simulate_paths(prob, graded_grid(0.2, 10, 0.25), Vector::Ones(3), ControlPolicy::zero(3), mc),
                    InvalidArgument);
}

TEST_CASE("explosive feedback is reported as instability") {
    const auto prob = small_anderson(2, 1.0);
    MCConfig mc;
    mc.paths = 64;
    const auto policy = ControlPolicy::constant_feedback(Matrix::Identity(2, 2) * 1e6);
    CHECK_THROWS_AS(simulate_paths(prob, graded_grid(1.0, 40, 0.0), Vector::Ones(2), policy, mc), InstabilityError);
}
