// Serial reference versus OpenMP kernels.

#include <benchmark/benchmark.h>

#include "spdelq/kernels.hpp"
#include "spdelq/riccati.hpp"
#include "spdelq/simulator.hpp"

using namespace spdelq;

static void channel_sum_args(benchmark::internal::Benchmark* b) {
    for (int m : {16, 32, 64}) b->Arg(m);
}

static std::vector<Matrix> channels(int m) {
    std::vector<Matrix> c;
    for (int j = 0; j < m; ++j) c.push_back(symmetrize(Matrix::Random(m, m)));
    return c;
}

static void BM_ChannelSumSerial(benchmark::State& st) {
    const int m = static_cast<int>(st.range(0));
    const auto c = channels(m);
    const Matrix p = symmetrize(Matrix::Random(m, m));
    for (auto _ : st) benchmark::DoNotOptimize(kernels::channel_sum_serial(c, p));
}
BENCHMARK(BM_ChannelSumSerial)->Apply(channel_sum_args);

static void BM_ChannelSumParallel(benchmark::State& st) {
    const int m = static_cast<int>(st.range(0));
    const auto c = channels(m);
    const Matrix p = symmetrize(Matrix::Random(m, m));
    for (auto _ : st) benchmark::DoNotOptimize(kernels::channel_sum(c, p));
}
BENCHMARK(BM_ChannelSumParallel)->Apply(channel_sum_args);

static void ensemble(benchmark::State& st, bool serial) {
    const int M = 16;
    const auto basis = build_anderson_basis(M, M);
    const Matrix I = Matrix::Identity(M, M);
    const auto prob = RiccatiProblem::constant(basis, I, {}, I, I, SymOperator::identity(M), 1e-3, 0.25, 0.1);
    const auto grid = graded_grid(0.1, 50, 0.25);
    const auto sol = quasi_linearize(prob, grid);
    Vector x0 = Vector::Zero(M);
    x0(0) = 1.0;
    MCConfig mc;
    mc.paths = st.range(0);
    SimulationOptions opts;
    opts.use_serial_reference = serial;
    const auto policy = ControlPolicy::feedback(sol.gains);
    for (auto _ : st) benchmark::DoNotOptimize(simulate_paths(prob, grid, x0, policy, mc, opts).data.terminal.data());
    st.SetItemsProcessed(st.iterations() * mc.paths);
}

static void BM_EnsembleSerial(benchmark::State& st) { ensemble(st, true); }
static void BM_EnsembleParallel(benchmark::State& st) { ensemble(st, false); }
BENCHMARK(BM_EnsembleSerial)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnsembleParallel)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
