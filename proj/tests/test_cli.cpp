#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(SPDELQ_TEST_WORKDIR) / "cli";

int run(const std::string& args, const std::string& log = "/dev/null") {
    const std::string cmd = std::string(SPDELQ_CLI) + " " + args + " > " + log + " 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path config(const std::string& name, const std::string& text) {
    fs::create_directories(kWork);
    const fs::path p = kWork / name;
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int count_lines(const fs::path& p) {
    std::ifstream is(p);
    std::string line;
    int n = 0;
    while (std::getline(is, line)) ++n;
    return n;
}

}  // namespace

TEST_CASE("riccati on the Anderson preset writes K+1 rows and a manifest") {
    const auto cfg = config("anderson.cfg", "preset = anderson\nK = 50\n");
    const auto out = kWork / "riccati";
    REQUIRE(run("riccati --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(count_lines(out / "path.csv") == 52);
    CHECK(count_lines(out / "gains.csv") == 52);
    const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(m["status"] == "ok");
    CHECK(m["config_hash"].get<std::string>().size() == 16);
    CHECK(m["parameters"].contains("tol"));
    CHECK(m["parameters"].contains("inner_tol"));
    CHECK(m["parameters"].contains("psd_slack"));
    CHECK(m["results"]["iterations"].get<int>() >= 1);
}

TEST_CASE("invalid control weight exits 1 and names strict positivity") {
    const auto cfg = config("bad_r.cfg", "preset = scalar\nr = 0.001\ndelta = 0.1\n");
    const auto log = kWork / "bad_r.log";
    CHECK(run("riccati --config " + cfg.string() + " --out " + (kWork / "bad").string(), log.string()) == 1);
    CHECK(slurp(log).find("strict positivity") != std::string::npos);
}

TEST_CASE("iteration cap exits 2 with the residual history") {
    const auto cfg = config("cap.cfg", "preset = anderson\nmodes = 4\nnoise_channels = 4\nK = 20\nmax_outer = 1\n");
    const auto out = kWork / "cap";
    const auto log = kWork / "cap.log";
    CHECK(run("riccati --config " + cfg.string() + " --out " + out.string(), log.string()) == 2);
    CHECK(slurp(log).find("residual history") != std::string::npos);
    const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(m["status"] == "non_convergence");
    CHECK(m["results"]["residual_history"].size() == 1);
}

TEST_CASE("simulate with zero paths exits 1") {
    const auto cfg = config("zero.cfg", "preset = anderson\nmodes = 4\nnoise_channels = 4\nK = 20\npaths = 0\n");
    CHECK(run("simulate --config " + cfg.string() + " --out " + (kWork / "zero").string()) == 1);
}

TEST_CASE("usage errors exit 1") {
    CHECK(run("") == 1);
    CHECK(run("riccati --preset nonsense") == 1);
    CHECK(run("riccati --config /nonexistent/file.cfg") == 1);
    const auto cfg = config("unknown.cfg", "preset = scalar\nfoo = 1\n");
    CHECK(run("are --config " + cfg.string()) == 1);
}

TEST_CASE("are on the scalar preset matches the quadratic root") {
    const auto out = kWork / "are";
    REQUIRE(run("are --preset scalar --out " + out.string()) == 0);
    std::ifstream is(out / "are.csv");
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "p_0_0");
    const double a = -2.0 * 9.869604401089358 + 1.0;
    const double root = (a + std::sqrt(a * a + 4.0)) / 2.0;
    CHECK(std::abs(std::stod(row) - root) < 1e-5);
}

TEST_CASE("verify-value on the Anderson preset passes") {
    const auto out = kWork / "verify";
    REQUIRE(run("verify-value --preset anderson --out " + out.string()) == 0);
    std::ifstream is(out / "verify.csv");
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header.rfind("lhs,rhs,gap,ci_combined", 0) == 0);
    std::stringstream ss(row);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    REQUIRE(v.size() >= 4);
    CHECK(v[2] <= 3.0 * v[3]);
}

TEST_CASE("seed override changes Monte-Carlo output and is recorded") {
    const auto cfg = config("seed.cfg", "preset = anderson\nmodes = 4\nnoise_channels = 4\nK = 20\npaths = 100\npolicy = zero\n");
    const auto a = kWork / "seed_a";
    const auto b = kWork / "seed_b";
    REQUIRE(run("simulate --config " + cfg.string() + " --out " + a.string()) == 0);
    REQUIRE(run("simulate --config " + cfg.string() + " --out " + b.string() + " --seed 99") == 0);
    CHECK(slurp(a / "cost.csv") != slurp(b / "cost.csv"));
    const auto m = nlohmann::json::parse(slurp(b / "manifest.json"));
    CHECK(m["parameters"]["seed"] == 99);
}

TEST_CASE("outputs are byte-identical across thread counts") {
    const auto cfg = config("det.cfg", "preset = anderson\nmodes = 6\nnoise_channels = 6\nK = 30\npaths = 200\n");
    for (const char* cmd : {"riccati", "simulate"}) {
        const auto o1 = kWork / (std::string("det1_") + cmd);
        const auto o4 = kWork / (std::string("det4_") + cmd);
        REQUIRE(run(std::string(cmd) + " --config " + cfg.string() + " --out " + o1.string() + " --threads 1") == 0);
        REQUIRE(run(std::string(cmd) + " --config " + cfg.string() + " --out " + o4.string() + " --threads 4") == 0);
        for (const auto& e : fs::directory_iterator(o1)) CHECK(slurp(e.path()) == slurp(o4 / e.path().filename()));
    }
}
