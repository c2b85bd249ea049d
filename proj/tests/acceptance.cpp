// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "oracles/scalar_riccati.hpp"
#include "spdelq/horizon.hpp"
#include "spdelq/lyapunov.hpp"
#include "spdelq/problem_file.hpp"
#include "spdelq/riccati.hpp"
#include "spdelq/simulator.hpp"
#include "spdelq/stats.hpp"

using namespace spdelq;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(const char* id, bool ok, const std::string& detail) {
    std::printf("%s %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

template <class... A>
std::string fmt(const char* f, A... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

void guarded(const char* id, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, std::string("exception: ") + e.what());
    }
}

Matrix gaussian(std::mt19937_64& rng, int r, int c, double scale) {
    std::normal_distribution<double> nd;
    Matrix a(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) a(i, j) = scale * nd(rng);
    return a;
}

Matrix random_psd(std::mt19937_64& rng, int n) {
    const Matrix a = gaussian(rng, n, n, 1.0);
    return a * a.transpose() / n;
}

// Random instance with M <= 4, m <= 2, N_noise <= 4.
RiccatiProblem random_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> dm(1, 4), dc(1, 2), dn(1, 4);
    const int M = dm(rng), m = dc(rng), N = dn(rng);
    std::vector<double> eig;
    for (int k = 1; k <= M; ++k) eig.push_back(-std::pow(k * std::numbers::pi, 2) / 2.0);
    std::vector<Matrix> C, D;
    for (int j = 0; j < N; ++j) {
        C.push_back(symmetrize(gaussian(rng, M, M, 0.6)));
        D.push_back(gaussian(rng, M, m, 0.3));
    }
    const Matrix r = gaussian(rng, m, m, 0.3);
    return RiccatiProblem::constant(SpectralBasis(eig, C), gaussian(rng, M, m, 1.0), D, random_psd(rng, M),
                                    Matrix::Identity(m, m) + r * r.transpose(), SymOperator(random_psd(rng, M)), 0.5,
                                    0.25, 0.5);
}

oracle::ScalarLq scalar_data() { return {-std::numbers::pi * std::numbers::pi, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0}; }

RiccatiProblem scalar_problem(double b) {
    const auto s = scalar_data();
    const SpectralBasis basis({s.mu}, {Matrix::Constant(1, 1, s.c)});
    return RiccatiProblem::constant(basis, Matrix::Constant(1, 1, b), {}, Matrix::Constant(1, 1, s.q),
                                    Matrix::Constant(1, 1, s.r), SymOperator::identity(1, s.g), 1.0, 0.25, 0.5);
}

void ac1() {
    const auto s = scalar_data();
    const auto prob = scalar_problem(1.0);
    const auto t0 = Clock::now();
    const auto sol = quasi_linearize(prob, graded_grid(0.5, 200, 0.25));
    const double secs = seconds_since(t0);
    const double ref = oracle::scalar_riccati_stiff(s, 0.5);
    const double err = std::abs(sol.path.front()(0, 0) - ref);
    report("AC1", err <= 1e-6 && secs < 1.0,
           fmt("P(0)=%.12g stiff oracle=%.12g |diff|=%.2e (tol 1e-6), runtime %.3fs (limit 1s)", sol.path.front()(0, 0),
               ref, err, secs));
}

void ac2_ac3() {
    std::mt19937_64 rng(20240611);
    double worst = 0.0, worst_mono = 0.0, worst_pos = 0.0;
    bool mono_ok = true;
    const auto t0 = Clock::now();
    for (int i = 0; i < 20; ++i) {
        const auto prob = random_instance(rng);
        RiccatiSettings st;
        st.keep_iterates = true;
        const auto sol = quasi_linearize(prob, graded_grid(prob.horizon, 100, 0.25), st);
        const auto direct = direct_riccati_oracle(prob, 400);
        worst = std::max(worst, (sol.path.front().matrix() - direct.front().matrix()).cwiseAbs().maxCoeff());
        // P^1 >= P^2 >= ... >= 0 at every node, slack 1e-9.
        for (std::size_t n = 0; n < sol.iterates.size(); ++n) {
            const auto& cur = sol.iterates[n];
            for (int k = 0; k <= cur.grid().intervals(); ++k) {
                const double pos = cur.value(k).min_eigenvalue();
                worst_pos = std::min(worst_pos, pos);
                if (pos < -1e-9) mono_ok = false;
                if (n == 0) continue;
                const double d = min_eigenvalue(sol.iterates[n - 1].value(k).matrix() - cur.value(k).matrix());
                worst_mono = std::min(worst_mono, d);
                if (d < -1e-9) mono_ok = false;
            }
        }
        if (sol.iterates.size() < 2) mono_ok = false;
    }
    const double secs = seconds_since(t0);
    report("AC2", worst <= 1e-5 && secs < 30.0,
           fmt("20 random instances: worst |P(0) - direct| = %.2e (tol 1e-5), runtime %.2fs (limit 30s)", worst, secs));
    report("AC3", mono_ok,
           fmt("worst min-eig(P^n - P^{n+1}) = %.2e, worst min-eig(P^n) = %.2e (slack -1e-9)", worst_mono, worst_pos));
}

void ac4_ac5() {
    auto pf = ProblemFile::preset("anderson");
    const auto prob = build_problem(pf);
    const auto grid = build_grid(pf, prob);
    MCConfig mc = build_mc(pf);
    mc.paths = 10000;
    const Vector x0 = build_x0(pf, prob.basis.modes());
    const int M = prob.basis.modes();
    const auto t0 = Clock::now();
    const auto sol = quasi_linearize(prob, grid);
    const auto opt = verify_value_identity(prob, sol, x0, ControlPolicy::feedback(sol.gains), mc);
    const double dev = std::abs(opt.cost.estimate - opt.value);
    bool ok = dev <= 3.0 * opt.cost.ci_halfwidth;
    std::string detail = fmt("M=%d N=%d K=%d paths=%lld: |J - <P0x0,x0>| = %.3e vs 3 CI = %.3e", M,
                             prob.basis.noise_channels(), grid.intervals(), mc.paths, dev, 3.0 * opt.cost.ci_halfwidth);
    std::mt19937_64 rng(77);
    double worst_ratio = 0.0;
    double worst_order = std::numeric_limits<double>::infinity();
    bool order_ok = true;
    for (int i = 0; i < 10; ++i) {
        const double scale = 0.25 * (i + 1);
        const Matrix E = gaussian(rng, prob.control_dim, M, scale / std::sqrt(static_cast<double>(M)));
        const auto rep = verify_value_identity(prob, sol, x0, ControlPolicy::feedback(sol.gains, E), mc);
        const double bound = 3.0 * rep.ci_combined + rep.allowance;
        worst_ratio = std::max(worst_ratio, rep.gap / bound);
        if (!rep.passed) ok = false;
        std::vector<double> diff(rep.path_costs.size());
        for (std::size_t p = 0; p < diff.size(); ++p) diff[p] = rep.path_costs[p] - opt.path_costs[p];
        const auto sd = summarize(diff);
        const double margin = (sd.mean + 3.0 * sd.ci_halfwidth) / opt.cost.estimate;
        worst_order = std::min(worst_order, margin);
        if (sd.mean < -3.0 * sd.ci_halfwidth) order_ok = false;
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 300.0;
    detail += fmt("; 10 perturbed: worst gap/(3 CI + allowance) = %.3f; runtime %.1fs (limit 300s)", worst_ratio, secs);
    report("AC4", ok, detail);
    report("AC5", order_ok,
           fmt("10 perturbed policies on common random numbers: min (J_pert - J_opt + 3 CI)/J_opt = %.3e (must be >= 0)",
               worst_order));
}

void ac6() {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> dm(1, 4), dn(1, 4);
    std::uniform_real_distribution<double> ut(0.0, 0.5);
    double worst = 0.0;
    bool ok = true;
    for (int i = 0; i < 5; ++i) {
        const int M = dm(rng), N = dn(rng);
        std::vector<double> eig;
        for (int k = 1; k <= M; ++k) eig.push_back(-std::pow(k * std::numbers::pi, 2) / 3.0);
        std::vector<Matrix> C;
        for (int j = 0; j < N; ++j) C.push_back(symmetrize(gaussian(rng, M, M, 0.5)));
        const SpectralBasis basis(eig, C);
        const double T = 1.0;
        const auto data =
            LyapunovData::uncontrolled(basis, T, 0.25, random_psd(rng, M), SymOperator(random_psd(rng, M)));
        const auto path = solve_lyapunov(data, graded_grid(T, 100, 0.25));
        const Vector x = gaussian(rng, M, 1, 1.0);
        const double t = ut(rng);
        MCConfig mc;
        mc.paths = 10000;
        mc.seed = 1000 + static_cast<std::uint64_t>(i);
        mc.steps = 400;
        const auto est = representation_value(data, t, x, mc);
        const double exact = x.dot(path.evaluate(t) * x);
        const double r = std::abs(est.estimate - exact) / (3.0 * est.ci_halfwidth);
        worst = std::max(worst, r);
        if (r > 1.0) ok = false;
    }
    report("AC6", ok, fmt("5 random Lyapunov instances, 1e4 paths: worst |<P_t x,x> - MC| / (3 CI) = %.3f", worst));
}

void ac7() {
    auto pf = ProblemFile::preset("anderson");
    const auto prob = build_problem(pf);
    const auto grid = build_grid(pf, prob);
    const auto sol = quasi_linearize(prob, grid);
    const auto data = linearized_data(prob, sol.path);
    const auto sb = singular_sum_bound(sol.path, data);
    std::vector<double> dist, gnorm;
    const double T = grid.end();
    for (int k = 1; k < grid.intervals(); ++k) {
        dist.push_back(T - grid[k]);
        gnorm.push_back(spectral_norm(sol.gains.gains[static_cast<std::size_t>(k)]));
    }
    const double gexp = fit_loglog(dist, gnorm).slope;
    const double alpha = 0.25;
    report("AC7", sb.fitted_exponent >= -2 * alpha - 0.1 && gexp >= -alpha - 0.1,
           fmt("G=I: channel-sum exponent %.4f (>= %.2f), gain exponent %.4f (>= %.2f)", sb.fitted_exponent,
               -2 * alpha - 0.1, gexp, -alpha - 0.1));
}

void ac8() {
    auto pf = ProblemFile::preset("scalar");
    const auto prob = build_problem(pf);
    const auto r = solve_are(prob);
    const double root = oracle::scalar_are_root(scalar_data());
    bool mono = true;
    for (std::size_t i = 1; i < r.values.size(); ++i)
        if (min_eigenvalue(r.values[i].matrix() - r.values[i - 1].matrix()) < -1e-9) mono = false;
    const double err = std::abs(r.P(0, 0) - root);
    report("AC8", err <= 1e-5 && mono && r.stationarity_residual <= 1e-6,
           fmt("P=%.12g root=%.12g |diff|=%.2e (tol 1e-5); horizons non-decreasing: %s; stationarity %.2e (tol 1e-6)",
               r.P(0, 0), root, err, mono ? "yes" : "no", r.stationarity_residual));
}

void ac9() {
    auto pf = ProblemFile::preset("anderson");
    const auto prob = build_problem(pf);
    auto pf_noisy = ProblemFile::preset("anderson");
    pf_noisy.set("noise_scale", "4");
    const auto noisy = build_problem(pf_noisy);
    const int M = prob.basis.modes();
    Vector x0 = Vector::Ones(M) / std::sqrt(static_cast<double>(M));
    MCConfig mc;
    mc.paths = 1000;
    mc.seed = 9;
    mc.steps = 1;
    const double lambda = 20.0;
    const Matrix K = -lambda * Matrix::Identity(prob.control_dim, M);
    const auto fb = check_stabilizing_feedback(prob, K, x0, 1.0, mc, 200);
    const auto open = check_stabilizing_feedback(noisy, Matrix::Zero(prob.control_dim, M), x0, 1.0, mc, 200);
    report("AC9", fb.stable && fb.decay_rate < 0.0 && open.decay_rate >= fb.decay_rate,
           fmt("u=-%gX: decay rate %.3f (< 0); lambda=0 with noise x4: rate %.3f (>= %.3f)", lambda, fb.decay_rate,
               open.decay_rate, fb.decay_rate));
}

void ac10() {
    const std::vector<double> pens{1, 10, 100, 1000, 10000};
    const auto grid = graded_grid(1.0, 200, 0.25);
    auto yes_prob = scalar_problem(1.0).with_horizon(1.0);
    auto no_prob = scalar_problem(0.0).with_horizon(1.0);
    const Vector x0 = Vector::Ones(1);
    MCConfig mc;
    mc.paths = 2000;
    mc.seed = 10;
    mc.steps = 1;
    const auto yes = null_control_sweep(yes_prob, x0, pens, grid, mc);
    const auto no = null_control_sweep(no_prob, x0, pens, grid, mc);
    bool decreasing = true;
    for (std::size_t i = 1; i < pens.size(); ++i)
        if (!(yes.terminal_msq[i] < yes.terminal_msq[i - 1])) decreasing = false;
    const bool toward_zero = yes.terminal_ratio < 1e-2;
    const NullControlSettings ns;
    const bool yes_blowup = yes.growth_exponent <= ns.blowup_exponent;
    const bool no_saturates = no.growth_exponent > ns.blowup_exponent;
    const bool opposite = yes.verdict != no.verdict && yes.verdict == "null_controllable";
    report("AC10", decreasing && toward_zero && yes_blowup && no_saturates && opposite,
           fmt("controllable: E|X_T|^2 %.3e -> %.3e (ratio %.2e), probe exponent %.3f, verdict %s; "
               "B=0: probe exponent %.3f, verdict %s",
               yes.terminal_msq.front(), yes.terminal_msq.back(), yes.terminal_ratio, yes.growth_exponent,
               yes.verdict.c_str(), no.growth_exponent, no.verdict.c_str()));
}

int run(const std::string& cmd) {
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void ac11(const std::string& cli, const fs::path& work) {
    struct Case {
        const char* command;
        const char* config;
    };
    const Case cases[] = {
        {"riccati", "preset = anderson\nmodes = 8\nnoise_channels = 8\nK = 60\n"},
        {"simulate", "preset = anderson\nmodes = 6\nnoise_channels = 6\nK = 40\npaths = 300\ndump = true\n"},
        {"verify-value", "preset = anderson\nmodes = 6\nnoise_channels = 6\nK = 40\npaths = 300\npolicy = perturbed\n"},
        {"are", "preset = scalar\n"},
        {"nullctrl", "preset = scalar\nT = 1\nK = 60\npaths = 200\npenalties = 1 10 100\n"},
        {"lyapunov", "preset = anderson\nmodes = 6\nnoise_channels = 6\nK = 40\nrep_t = 0.05\npaths = 300\n"},
        {"ac0-check", "preset = anderson\n"},
    };
    fs::create_directories(work);
    int compared = 0;
    std::string bad;
    for (const auto& c : cases) {
        const fs::path cfg = work / (std::string(c.command) + ".cfg");
        std::ofstream(cfg) << c.config;
        std::vector<std::string> outs;
        for (int threads : {1, 4}) {
            const fs::path out = work / (std::string(c.command) + "_t" + std::to_string(threads));
            fs::remove_all(out);
            const int code = run(cli + " " + c.command + " --config " + cfg.string() + " --out " + out.string() +
                                 " --threads " + std::to_string(threads) + " > /dev/null 2>&1");
            if (code != 0) bad += std::string(" ") + c.command + "(exit " + std::to_string(code) + ")";
            std::string blob;
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(out))
                if (e.path().extension() != ".json") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) blob += f.filename().string() + "\n" + slurp(f);
            blob += "manifest\n" + slurp(out / "manifest.json");
            outs.push_back(blob);
        }
        if (outs[0] != outs[1] || outs[0].empty()) bad += std::string(" ") + c.command + "(differs)";
        ++compared;
    }
    report("AC11", bad.empty(),
           fmt("%d subcommands run with --threads 1 and 4: outputs byte-identical%s", compared,
               bad.empty() ? "" : (": mismatch" + bad).c_str()));
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "./spdelq";
    const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "spdelq_acceptance";
    guarded("AC1", ac1);
    guarded("AC2/AC3", ac2_ac3);
    guarded("AC4/AC5", ac4_ac5);
    guarded("AC6", ac6);
    guarded("AC7", ac7);
    guarded("AC8", ac8);
    guarded("AC9", ac9);
    guarded("AC10", ac10);
    guarded("AC11", [&] { ac11(cli, work); });
    std::printf("%s: %d criterion line(s) failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
