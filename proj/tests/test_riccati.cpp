#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles/scalar_riccati.hpp"
#include "spdelq/errors.hpp"
#include "spdelq/riccati.hpp"

using namespace spdelq;

namespace {

RiccatiProblem scalar_problem(const oracle::ScalarLq& s, double T) {
    const SpectralBasis basis({s.mu}, {Matrix::Constant(1, 1, s.c)});
    std::vector<Matrix> D;
    if (s.d != 0.0) D.push_back(Matrix::Constant(1, 1, s.d));
    return RiccatiProblem::constant(basis, Matrix::Constant(1, 1, s.b), D, Matrix::Constant(1, 1, s.q),
                                    Matrix::Constant(1, 1, s.r), SymOperator::identity(1, s.g), 1e-3, 0.25, T);
}

RiccatiProblem random_problem(std::mt19937_64& rng, int M, int m, int N) {
    std::normal_distribution<double> nd;
    auto rnd = [&](int r, int c, double scale) {
        Matrix a(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) a(i, j) = scale * nd(rng);
        return a;
    };
    std::vector<double> eig;
    for (int k = 1; k <= M; ++k) eig.push_back(-std::pow(k * std::numbers::pi, 2) / 4.0);
    std::vector<Matrix> C, D;
    for (int j = 0; j < N; ++j) {
        C.push_back(symmetrize(rnd(M, M, 0.5)));
        D.push_back(rnd(M, m, 0.3));
    }
    const Matrix q = rnd(M, M, 1.0);
    const Matrix g = rnd(M, M, 1.0);
    const Matrix r = rnd(m, m, 0.3);
    const Matrix R = Matrix::Identity(m, m) + r * r.transpose();
    return RiccatiProblem::constant(SpectralBasis(eig, C), rnd(M, m, 1.0), D, q * q.transpose() / M, R,
                                    SymOperator(g * g.transpose() / M), 0.5, 0.25, 0.5);
}

}  // namespace

TEST_CASE("scalar Riccati against closed form and stiff integrator") {
    const oracle::ScalarLq s{-std::numbers::pi * std::numbers::pi, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0};
    const auto prob = scalar_problem(s, 0.5);
    const auto sol = quasi_linearize(prob, graded_grid(0.5, 100, 0.25));
    for (int k = 0; k <= 100; k += 10) {
        const double tau = 0.5 - sol.path.grid()[k];
        CHECK(sol.path.value(k)(0, 0) == doctest::Approx(oracle::scalar_riccati_closed(s, tau)).scale(1).epsilon(1e-10));
    }
    CHECK(sol.path.front()(0, 0) == doctest::Approx(oracle::scalar_riccati_stiff(s, 0.5)).scale(1).epsilon(1e-9));
    CHECK(sol.form_residual < 1e-8);
}

TEST_CASE("scalar Riccati with control noise against stiff integrator") {
    const oracle::ScalarLq s{-3.0, 1.2, 0.8, 0.6, 1.5, 0.7, 0.4};
    const auto sol = quasi_linearize(scalar_problem(s, 1.0), graded_grid(1.0, 100, 0.25));
    CHECK(sol.path.front()(0, 0) == doctest::Approx(oracle::scalar_riccati_stiff(s, 1.0)).scale(1).epsilon(1e-8));
}

TEST_CASE("iterates decrease monotonically and agree with the direct integrator") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 3; ++trial) {
        const auto prob = random_problem(rng, 3, 2, 2);
        RiccatiSettings st;
        st.keep_iterates = true;
        const auto sol = quasi_linearize(prob, graded_grid(prob.horizon, 100, 0.25), st);
        REQUIRE(sol.initial_values.size() >= 2);
        // The first iterate starts from a zero gain, so later ones can only improve.
        for (std::size_t i = 1; i < sol.initial_values.size(); ++i) {
            const Matrix d = sol.initial_values[i - 1].matrix() - sol.initial_values[i].matrix();
            CHECK(min_eigenvalue(d) >= -1e-9 * std::max(1.0, sol.initial_values[i - 1].norm()));
        }
        CHECK(sol.monotonicity_worst >= -1e-9);
        CHECK(sol.positivity_worst >= -1e-9);
        const auto direct = direct_riccati_oracle(prob, 200);
        CHECK((direct.front().matrix() - sol.path.front().matrix()).cwiseAbs().maxCoeff() < 1e-7);
    }
}

TEST_CASE("completion of squares identity") {
    std::mt19937_64 rng(9);
    const auto prob = random_problem(rng, 3, 2, 3);
    Matrix P = Matrix::Random(3, 3);
    P = P * P.transpose();
    const Matrix K = Matrix::Random(2, 3);
    CHECK(completion_identity_check(prob, P, K, 0.1) < 1e-12);
}

TEST_CASE("gain path matches the lambda operator") {
    std::mt19937_64 rng(2);
    const auto prob = random_problem(rng, 2, 1, 1);
    const auto sol = quasi_linearize(prob, graded_grid(prob.horizon, 20, 0.25));
    const auto& grid = sol.gains.grid;
    for (int k = 0; k < grid.intervals(); ++k) {
        const auto lr = lambda_operator(prob, grid[k], sol.path.value(k).matrix());
        CHECK((sol.gains.lookup(grid[k]) - lr.gain).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK_NOTHROW(sol.gains.lookup(prob.horizon));
}

TEST_CASE("hypotheses are enforced") {
    const oracle::ScalarLq s{-1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0};
    auto prob = scalar_problem(s, 1.0);
    prob.R = [](double) { return Matrix::Constant(1, 1, 1e-5); };
    try {
        quasi_linearize(prob, graded_grid(1.0, 10, 0.25));
        FAIL("expected rejection");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("strict positivity") != std::string::npos);
    }
    prob = scalar_problem(s, 1.0);
    prob.Q = [](double) { return Matrix::Constant(1, 1, -1.0); };
    CHECK_THROWS_AS(quasi_linearize(prob, graded_grid(1.0, 10, 0.25)), InvalidArgument);
}

TEST_CASE("iteration cap raises with the residual history") {
    std::mt19937_64 rng(4);
    const auto prob = random_problem(rng, 3, 2, 2);
    RiccatiSettings st;
    st.max_outer = 1;
    try {
        quasi_linearize(prob, graded_grid(prob.horizon, 20, 0.25), st);
        FAIL("expected non-convergence");
    } catch (const NonConvergenceError& e) {
        CHECK(e.history().size() == 1);
    }
}

TEST_CASE("finer grids converge toward the direct integrator") {
    std::mt19937_64 rng(8);
    const auto prob = random_problem(rng, 2, 1, 2);
    const Matrix ref = direct_riccati_oracle(prob, 400).front().matrix();
    const double e1 = (quasi_linearize(prob, graded_grid(prob.horizon, 4, 0.0)).path.front().matrix() - ref).norm();
    const double e2 = (quasi_linearize(prob, graded_grid(prob.horizon, 8, 0.0)).path.front().matrix() - ref).norm();
    MESSAGE("K=4 error " << e1 << ", K=8 error " << e2);
    CHECK((e2 < 1e-9 || e1 / e2 > 8.0));
}
