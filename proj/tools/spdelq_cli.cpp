// Command-line front end: loads a problem file (or a preset), runs one solver and writes
// CSV results plus a JSON run manifest into the output directory.
//
// Exit codes: 0 success, 1 invalid input, 2 numerical failure or failed check.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "spdelq/csv.hpp"
#include "spdelq/errors.hpp"
#include "spdelq/horizon.hpp"
#include "spdelq/lyapunov.hpp"
#include "spdelq/problem_file.hpp"
#include "spdelq/riccati.hpp"
#include "spdelq/simulator.hpp"

namespace fs = std::filesystem;
using namespace spdelq;
using json = nlohmann::ordered_json;

namespace {

struct Options {
    std::string config;
    std::string out = ".";
    std::string preset;
    long long seed = -1;
    int threads = 0;
};

struct Run {
    ProblemFile pf;
    fs::path out;
    json results = json::object();
};

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw InvalidArgument("cannot write '" + p.string() + "'");
    return os;
}

void write_gains_csv(const fs::path& p, const GainPath& gp) {
    auto os = open_out(p);
    const auto rows = gp.gains.front().rows();
    const auto cols = gp.gains.front().cols();
    std::vector<std::string> header{"t"};
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) header.push_back("k_" + std::to_string(i) + "_" + std::to_string(j));
    csv::write_header(os, header);
    std::vector<double> row;
    for (std::size_t k = 0; k < gp.gains.size(); ++k) {
        row.assign(1, gp.grid.nodes()[k]);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) row.push_back(gp.gains[k](i, j));
        csv::write_row(os, row);
    }
}

void write_path_csv(const fs::path& p, const OperatorPath& path) {
    auto os = open_out(p);
    path.write_csv(os);
}

RiccatiSolution solve_riccati(Run& run, const RiccatiProblem& prob, const GradedTimeGrid& grid) {
    const auto settings = build_riccati_settings(run.pf);
    auto sol = quasi_linearize(prob, grid, settings);
    run.results["iterations"] = sol.iterations;
    run.results["residual_history"] = sol.history;
    run.results["monotonicity_worst"] = sol.monotonicity_worst;
    run.results["positivity_worst"] = sol.positivity_worst;
    run.results["form_residual"] = sol.form_residual;
    return sol;
}

int cmd_riccati(Run& run) {
    const auto prob = build_problem(run.pf);
    const auto grid = build_grid(run.pf, prob);
    const auto sol = solve_riccati(run, prob, grid);
    write_path_csv(run.out / "path.csv", sol.path);
    write_gains_csv(run.out / "gains.csv", sol.gains);
    run.results["p0_norm"] = sol.path.front().norm();
    return 0;
}

ControlPolicy build_policy(Run& run, const RiccatiProblem& prob, const GradedTimeGrid& grid, const RiccatiSolution* sol) {
    const std::string kind = run.pf.get_string("policy", sol ? "optimal" : "zero");
    if (kind == "zero") return ControlPolicy::zero(prob.control_dim);
    if (!sol) throw InvalidArgument("policy '" + kind + "' needs a Riccati solution");
    if (kind == "optimal") return ControlPolicy::feedback(sol->gains);
    if (kind == "perturbed") {
        const double scale = run.pf.get_double("perturbation_scale", 0.5);
        const Matrix E = Matrix::Constant(prob.control_dim, prob.basis.modes(), scale / prob.basis.modes());
        return ControlPolicy::feedback(sol->gains, E);
    }
    (void)grid;
    throw InvalidArgument("unknown policy '" + kind + "' (expected optimal, perturbed or zero)");
}

void put_cost(json& j, const CostReport& c) {
    j["cost_estimate"] = c.estimate;
    j["cost_ci_halfwidth"] = c.ci_halfwidth;
    j["terminal_term"] = c.terminal_term;
    j["running_state_term"] = c.running_state_term;
    j["running_control_term"] = c.running_control_term;
    j["paths_used"] = c.paths_used;
}

int cmd_simulate(Run& run) {
    const auto prob = build_problem(run.pf);
    const auto grid = build_grid(run.pf, prob);
    MCConfig mc = build_mc(run.pf);
    mc.store_states = run.pf.get_string("dump", "false") == "true";
    const Vector x0 = build_x0(run.pf, prob.basis.modes());
    std::optional<RiccatiSolution> sol;
    const std::string kind = run.pf.has("policy") ? run.pf.get_string("policy", "optimal") : "optimal";
    if (kind != "zero") sol = solve_riccati(run, prob, grid);
    const auto policy = build_policy(run, prob, grid, sol ? &*sol : nullptr);
    const auto ens = simulate_paths(prob, grid, x0, policy, mc);
    const auto cost = estimate_cost(prob, ens, policy);
    {
        auto os = open_out(run.out / "moments.csv");
        write_moment_csv(os, ens);
    }
    {
        auto os = open_out(run.out / "cost.csv");
        write_cost_csv(os, cost);
    }
    if (mc.store_states) {
        auto os = open_out(run.out / "paths.lqsp");
        write_binary_dump(os, ens);
    }
    put_cost(run.results, cost);
    run.results["moment_bound_constant"] = moment_bound_constant(ens, x0);
    return 0;
}

int cmd_verify_value(Run& run) {
    const auto prob = build_problem(run.pf);
    const auto grid = build_grid(run.pf, prob);
    const MCConfig mc = build_mc(run.pf);
    const Vector x0 = build_x0(run.pf, prob.basis.modes());
    const auto sol = solve_riccati(run, prob, grid);
    const auto policy = build_policy(run, prob, grid, &sol);
    ValueIdentitySettings vs;
    vs.allowance_rel = run.pf.get_double("allowance_rel", vs.allowance_rel);
    const auto rep = verify_value_identity(prob, sol, x0, policy, mc, vs);
    {
        auto os = open_out(run.out / "verify.csv");
        csv::write_header(os, {"lhs", "rhs", "gap", "ci_combined", "ci_lhs", "ci_rhs", "allowance", "value",
                               "cost_estimate", "cost_ci_halfwidth"});
        const double row[] = {rep.lhs, rep.rhs, rep.gap, rep.ci_combined, rep.ci_lhs, rep.ci_rhs, rep.allowance,
                              rep.value, rep.cost.estimate, rep.cost.ci_halfwidth};
        csv::write_row(os, row);
    }
    run.results["lhs"] = rep.lhs;
    run.results["rhs"] = rep.rhs;
    run.results["gap"] = rep.gap;
    run.results["ci_combined"] = rep.ci_combined;
    run.results["allowance"] = rep.allowance;
    run.results["passed"] = rep.passed;
    put_cost(run.results, rep.cost);
    if (!rep.passed) {
        std::cerr << "value identity gap " << rep.gap << " exceeds 3 CI + allowance\n";
        return 2;
    }
    return 0;
}

int cmd_are(Run& run) {
    const auto prob = build_problem(run.pf);
    AreSettings as;
    as.horizons = run.pf.get_list("horizons", as.horizons);
    as.tol = run.pf.get_double("are_tol", as.tol);
    as.intervals = static_cast<int>(run.pf.get_int("are_intervals", as.intervals));
    as.psd_slack = run.pf.get_double("psd_slack", as.psd_slack);
    as.riccati = build_riccati_settings(run.pf);
    const auto r = solve_are(prob, as);
    {
        auto os = open_out(run.out / "are.csv");
        const SymOperator& P = r.P;
        std::vector<std::string> header;
        std::vector<double> row;
        for (int i = 0; i < P.dim(); ++i)
            for (int j = i; j < P.dim(); ++j) {
                header.push_back("p_" + std::to_string(i) + "_" + std::to_string(j));
                row.push_back(P(i, j));
            }
        csv::write_header(os, header);
        csv::write_row(os, row);
    }
    {
        auto os = open_out(run.out / "horizons.csv");
        csv::write_header(os, {"T", "p0_norm", "increment"});
        for (std::size_t i = 0; i < r.horizons_used.size(); ++i) {
            const double inc = i == 0 ? r.values[0].norm() : r.convergence_history[i - 1];
            const double row[] = {r.horizons_used[i], r.values[i].norm(), inc};
            csv::write_row(os, row);
        }
    }
    run.results["horizons_used"] = r.horizons_used;
    run.results["convergence_history"] = r.convergence_history;
    run.results["stationarity_residual"] = r.stationarity_residual;
    run.results["monotonicity_worst"] = r.monotonicity_worst;
    if (run.pf.has("stab_horizon")) {
        // Closed-loop check with the ARE gain, or with u = -stab_gain B* X when a gain is given.
        const double horizon = run.pf.get_double("stab_horizon", 1.0);
        const auto intervals = run.pf.get_int("stab_intervals", 200);
        const MCConfig mc = build_mc(run.pf);
        const Vector x0 = build_x0(run.pf, prob.basis.modes());
        const Matrix K = run.pf.has("stab_gain") ? Matrix(-run.pf.get_double("stab_gain", 0.0) * prob.B(0.0).transpose())
                                                 : are_gain(prob, r.P);
        const auto st = check_stabilizing_feedback(prob, K, x0, horizon, mc, static_cast<int>(intervals));
        run.results["closed_loop_decay_rate"] = st.decay_rate;
        run.results["closed_loop_stable"] = st.stable;
        run.results["closed_loop_diagnostic"] = st.diagnostic;
    }
    return 0;
}

int cmd_nullctrl(Run& run) {
    const auto prob = build_problem(run.pf);
    const auto grid = build_grid(run.pf, prob);
    const MCConfig mc = build_mc(run.pf);
    const Vector x0 = build_x0(run.pf, prob.basis.modes());
    const auto penalties = run.pf.get_list("penalties", {1, 10, 100, 1000, 10000});
    NullControlSettings ns;
    ns.probe_levels = static_cast<int>(run.pf.get_int("probe_levels", ns.probe_levels));
    ns.riccati = build_riccati_settings(run.pf);
    const auto s = null_control_sweep(prob, x0, penalties, grid, mc, ns);
    {
        auto os = open_out(run.out / "sweep.csv");
        write_sweep_csv(os, s);
    }
    run.results["terminal_msq"] = s.terminal_msq;
    run.results["saturation_ratio"] = s.saturation_ratio;
    run.results["growth_exponent"] = s.growth_exponent;
    run.results["terminal_ratio"] = s.terminal_ratio;
    run.results["verdict"] = s.verdict;
    return 0;
}

int cmd_lyapunov(Run& run) {
    const auto prob = build_problem(run.pf);
    const auto grid = build_grid(run.pf, prob);
    const auto settings = build_riccati_settings(run.pf);
    const auto data = LyapunovData::uncontrolled(prob.basis, prob.horizon, prob.alpha, prob.Q(0.0), prob.G);
    const auto path = solve_lyapunov(data, grid, settings.lyapunov);
    write_path_csv(run.out / "path.csv", path);
    const auto ap = a_priori_check(path, data);
    const auto sb = singular_sum_bound(path, data);
    run.results["a_priori_worst_ratio"] = ap.worst_ratio;
    run.results["singular_exponent"] = sb.fitted_exponent;
    run.results["singular_constant"] = sb.constant;
    if (run.pf.has("rep_t")) {
        const double t = run.pf.get_double("rep_t", 0.0);
        const MCConfig mc = build_mc(run.pf);
        const Vector x0 = build_x0(run.pf, prob.basis.modes());
        const auto est = representation_value(data, t, x0, mc);
        run.results["representation_estimate"] = est.estimate;
        run.results["representation_ci_halfwidth"] = est.ci_halfwidth;
        run.results["quadratic_form"] = x0.dot(path.evaluate(t) * x0);
    }
    return 0;
}

int cmd_ac0(Run& run) {
    const auto prob = build_problem(run.pf);
    const double t_min = run.pf.get_double("t_min", 1e-3);
    const double t_max = run.pf.get_double("t_max", 1e-1);
    const auto count = run.pf.get_int("t_count", 20);
    const double margin = run.pf.get_double("ac0_margin", 0.15);
    if (!(t_min > 0.0 && t_max > t_min) || count < 2) throw InvalidArgument("need 0 < t_min < t_max and t_count >= 2");
    std::vector<double> ts;
    for (long long i = 0; i < count; ++i)
        ts.push_back(t_min * std::pow(t_max / t_min, static_cast<double>(i) / static_cast<double>(count - 1)));
    const auto rep = verify_ac0(prob.basis, ts, prob.alpha, margin);
    {
        auto os = open_out(run.out / "ac0.csv");
        csv::write_header(os, {"t", "S"});
        for (std::size_t i = 0; i < rep.times.size(); ++i) {
            const double row[] = {rep.times[i], rep.values[i]};
            csv::write_row(os, row);
        }
    }
    run.results["fitted_exponent"] = rep.fitted_exponent;
    run.results["prefactor"] = rep.prefactor;
    run.results["constant"] = rep.constant;
    run.results["passed"] = rep.passed;
    return rep.passed ? 0 : 2;
}

void write_manifest(const Run& run, const std::string& command, const std::string& status) {
    json m;
    m["command"] = command;
    m["schema_version"] = ProblemFile::kSchemaVersion;
    m["config_hash"] = run.pf.hash();
    m["status"] = status;
    m["parameters"] = run.pf.consumed();
    m["results"] = run.results;
    std::ofstream os(run.out / "manifest.json", std::ios::binary);
    os << m.dump(2) << '\n';
}

int dispatch(const std::string& command, const Options& opt, int (*fn)(Run&)) {
    Run run;
    try {
        if (!opt.config.empty()) {
            run.pf = ProblemFile::load(opt.config);
            if (!opt.preset.empty() && !run.pf.has("preset")) run.pf.set("preset", opt.preset);
        } else {
            run.pf = ProblemFile::preset(opt.preset.empty() ? "anderson" : opt.preset);
        }
        if (opt.seed >= 0) run.pf.set("seed", std::to_string(opt.seed));
        if (opt.threads > 0) omp_set_num_threads(opt.threads);
        run.out = opt.out;
        fs::create_directories(run.out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    try {
        const int code = fn(run);
        write_manifest(run, command, code == 0 ? "ok" : "check_failed");
        return code;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 1;
    } catch (const NonConvergenceError& e) {
        run.results["residual_history"] = e.history();
        run.results["error"] = e.what();
        write_manifest(run, command, "non_convergence");
        std::cerr << "did not converge: " << e.what() << "\nresidual history:";
        for (double h : e.history()) std::cerr << ' ' << csv::format(h);
        std::cerr << '\n';
        return 2;
    } catch (const NumericalError& e) {
        run.results["error"] = e.what();
        write_manifest(run, command, "numerical_error");
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LQ control of linear SPDEs with multiplicative white noise"};
    app.require_subcommand(1);
    Options opt;
    struct Cmd {
        const char* name;
        const char* help;
        int (*fn)(Run&);
    };
    const Cmd cmds[] = {
        {"riccati", "solve the finite-horizon Riccati equation", cmd_riccati},
        {"simulate", "simulate the controlled state and estimate the cost", cmd_simulate},
        {"verify-value", "check the value identity by Monte Carlo", cmd_verify_value},
        {"are", "solve the algebraic Riccati equation by horizon extension", cmd_are},
        {"nullctrl", "penalty sweep for null controllability", cmd_nullctrl},
        {"lyapunov", "solve the uncontrolled Lyapunov equation", cmd_lyapunov},
        {"ac0-check", "check the smoothing bound of the noise channels", cmd_ac0},
    };
    std::vector<std::pair<CLI::App*, const Cmd*>> subs;
    for (const auto& c : cmds) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", opt.config, "problem file (key = value or JSON)");
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--preset", opt.preset, "anderson or scalar")->check(CLI::IsMember({"anderson", "scalar"}));
        sub->add_option("--seed", opt.seed, "override the Monte-Carlo seed");
        sub->add_option("--threads", opt.threads, "maximum worker threads");
        subs.emplace_back(sub, &c);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    for (const auto& [sub, c] : subs)
        if (sub->parsed()) return dispatch(c->name, opt, c->fn);
    return 1;
}
