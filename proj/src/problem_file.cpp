#include "spdelq/problem_file.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

#include "spdelq/csv.hpp"
#include "spdelq/errors.hpp"

namespace spdelq {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "schema_version", "kind", "preset", "modes", "noise_channels", "noise_scale", "eigenvalues", "B", "Q", "R",
        "G", "b", "c", "d", "q", "r", "g", "mu", "delta", "alpha", "T", "K", "paths", "seed", "steps",
        "mc_noise_channels", "tol", "max_outer", "inner_tol", "inner_max", "psd_slack", "x0", "penalties",
        "horizons", "are_tol", "are_intervals", "probe_levels", "policy", "perturbation_scale", "allowance_rel",
        "stab_gain", "stab_horizon", "stab_intervals", "t_min", "t_max", "t_count", "ac0_margin", "rep_t",
        "dump", "oracle_steps"};
    return keys;
}

bool is_channel_key(const std::string& k) {
    static const std::regex re("[CD][1-9][0-9]*");
    return std::regex_match(k, re);
}

double to_double(const std::string& key, const std::string& s) {
    const std::string t = trim(s);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw InvalidArgument("key '" + key + "': '" + s + "' is not a number");
    return v;
}

std::vector<double> to_list(const std::string& key, const std::string& s) {
    std::vector<double> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(to_double(key, tok));
    return out;
}

nlohmann::ordered_json matrix_json(const Matrix& m) {
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(r);
    }
    return rows;
}

std::string json_scalar_text(const nlohmann::json& v, const std::string& key) {
    if (v.is_number()) return csv::format(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    throw InvalidArgument("key '" + key + "': unsupported JSON value");
}

}  // namespace

Matrix parse_matrix(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(text);
    std::string row;
    while (std::getline(ss, row, ';')) {
        if (trim(row).empty()) continue;
        rows.push_back(to_list("matrix", row));
    }
    if (rows.empty()) throw InvalidArgument("empty matrix literal");
    const std::size_t cols = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != cols || cols == 0) throw InvalidArgument("matrix literal rows differ in length: '" + text + "'");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

void ProblemFile::check_keys() const {
    for (const auto& [k, v] : raw_)
        if (!known_keys().count(k) && !is_channel_key(k)) throw InvalidArgument("unknown key '" + k + "'");
    if (has("schema_version")) {
        const double v = to_double("schema_version", raw_.at("schema_version"));
        if (v != kSchemaVersion)
            throw InvalidArgument("unsupported schema_version " + raw_.at("schema_version") + " (supported: 1)");
    }
}

ProblemFile ProblemFile::parse_text(const std::string& text) {
    ProblemFile pf;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidArgument("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw InvalidArgument("line " + std::to_string(lineno) + ": empty key");
        if (pf.raw_.count(key)) throw InvalidArgument("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        pf.raw_[key] = value;
    }
    pf.check_keys();
    return pf;
}

ProblemFile ProblemFile::parse_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InvalidArgument("JSON problem file must be an object");
    ProblemFile pf;
    for (const auto& [key, v] : j.items()) {
        std::string text_value;
        if (v.is_array()) {
            const bool nested = !v.empty() && v.front().is_array();
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (nested) {
                    if (i > 0) text_value += "; ";
                    for (std::size_t c = 0; c < v[i].size(); ++c) {
                        if (c > 0) text_value += ' ';
                        text_value += json_scalar_text(v[i][c], key);
                    }
                } else {
                    if (i > 0) text_value += ' ';
                    text_value += json_scalar_text(v[i], key);
                }
            }
        } else {
            text_value = json_scalar_text(v, key);
        }
        pf.raw_[key] = text_value;
    }
    pf.check_keys();
    return pf;
}

ProblemFile ProblemFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot read config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return parse_json(text);
    return parse_text(text);
}

ProblemFile ProblemFile::preset(const std::string& name) {
    if (name != "anderson" && name != "scalar") throw InvalidArgument("unknown preset '" + name + "'");
    ProblemFile pf;
    pf.raw_["preset"] = name;
    return pf;
}

void ProblemFile::set(const std::string& key, const std::string& value) {
    raw_[key] = value;
    check_keys();
}

const std::string* ProblemFile::find(const std::string& key) const {
    const auto it = raw_.find(key);
    return it == raw_.end() ? nullptr : &it->second;
}

double ProblemFile::get_double(const std::string& key, double fallback) {
    const auto* s = find(key);
    const double v = s ? to_double(key, *s) : fallback;
    consumed_[key] = v;
    return v;
}

double ProblemFile::require_double(const std::string& key) {
    if (!has(key)) throw InvalidArgument("missing key '" + key + "'");
    return get_double(key, 0.0);
}

long long ProblemFile::get_int(const std::string& key, long long fallback) {
    const auto* s = find(key);
    long long v = fallback;
    if (s) {
        const double d = to_double(key, *s);
        if (d != std::floor(d) || std::abs(d) > 9e15) throw InvalidArgument("key '" + key + "' must be an integer");
        v = static_cast<long long>(d);
    }
    consumed_[key] = v;
    return v;
}

std::string ProblemFile::get_string(const std::string& key, const std::string& fallback) {
    const auto* s = find(key);
    const std::string v = s ? *s : fallback;
    consumed_[key] = v;
    return v;
}

std::vector<double> ProblemFile::get_list(const std::string& key, const std::vector<double>& fallback) {
    const auto* s = find(key);
    const std::vector<double> v = s ? to_list(key, *s) : fallback;
    consumed_[key] = v;
    return v;
}

Matrix ProblemFile::get_matrix(const std::string& key, const Matrix& fallback) {
    const auto* s = find(key);
    const Matrix v = s ? parse_matrix(*s) : fallback;
    consumed_[key] = matrix_json(v);
    return v;
}

Matrix ProblemFile::require_matrix(const std::string& key) {
    if (!has(key)) throw InvalidArgument("missing key '" + key + "'");
    return get_matrix(key, Matrix());
}

std::string ProblemFile::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [k, v] : raw_) {
        mix(k);
        mix("=");
        mix(v);
        mix("\n");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

Matrix scaled_identity(int n, double s) { return s * Matrix::Identity(n, n); }

}  // namespace

RiccatiProblem build_problem(ProblemFile& pf) {
    const auto version = pf.get_int("schema_version", ProblemFile::kSchemaVersion);
    if (version != ProblemFile::kSchemaVersion) throw InvalidArgument("unsupported schema_version");
    const std::string preset = pf.get_string("preset", "custom");
    RiccatiProblem p;
    if (preset == "anderson") {
        const int M = static_cast<int>(pf.get_int("modes", 16));
        if (M < 1) throw InvalidArgument("modes must be positive");
        const int N = static_cast<int>(pf.get_int("noise_channels", M));
        const double scale = pf.get_double("noise_scale", 1.0);
        const double b = pf.get_double("b", 1.0);
        const double q = pf.get_double("q", 1.0);
        const double r = pf.get_double("r", 1.0);
        const double g = pf.get_double("g", 1.0);
        const double delta = pf.get_double("delta", r);
        const double alpha = pf.get_double("alpha", 0.25);
        const double T = pf.get_double("T", 0.1);
        p = RiccatiProblem::constant(build_anderson_basis(M, N).scaled(scale), scaled_identity(M, b), {},
                                     scaled_identity(M, q), scaled_identity(M, r),
                                     SymOperator(scaled_identity(M, g)), delta, alpha, T);
    } else if (preset == "scalar") {
        const double mu = pf.get_double("mu", -std::numbers::pi * std::numbers::pi);
        const double b = pf.get_double("b", 1.0);
        const double c = pf.get_double("c", 1.0);
        const double d = pf.get_double("d", 0.0);
        const double q = pf.get_double("q", 1.0);
        const double r = pf.get_double("r", 1.0);
        const double g = pf.get_double("g", 0.0);
        const double delta = pf.get_double("delta", r);
        const double alpha = pf.get_double("alpha", 0.25);
        const double T = pf.get_double("T", 0.5);
        if (!(mu < 0.0)) throw InvalidArgument("mu must be negative");
        SpectralBasis basis({mu}, {Matrix::Constant(1, 1, c)});
        std::vector<Matrix> D;
        if (d != 0.0) D.push_back(Matrix::Constant(1, 1, d));
        p = RiccatiProblem::constant(basis, Matrix::Constant(1, 1, b), D, Matrix::Constant(1, 1, q),
                                     Matrix::Constant(1, 1, r), SymOperator(Matrix::Constant(1, 1, g)), delta, alpha, T);
    } else if (preset == "custom") {
        const auto eigs = pf.get_list("eigenvalues", {});
        if (eigs.empty()) throw InvalidArgument("custom problems need 'eigenvalues'");
        const int M = static_cast<int>(eigs.size());
        std::vector<Matrix> C, D;
        for (int j = 1; pf.has("C" + std::to_string(j)); ++j) C.push_back(pf.get_matrix("C" + std::to_string(j), Matrix()));
        for (int j = 1; pf.has("D" + std::to_string(j)); ++j) D.push_back(pf.get_matrix("D" + std::to_string(j), Matrix()));
        if (C.empty()) C.push_back(Matrix::Zero(M, M));
        for (const auto& c : C)
            if (c.rows() != M || c.cols() != M) throw InvalidArgument("each C_j must be M x M");
        const Matrix B = pf.require_matrix("B");
        const int m = static_cast<int>(B.cols());
        const Matrix Q = pf.get_matrix("Q", Matrix::Zero(M, M));
        const Matrix R = pf.get_matrix("R", Matrix::Identity(m, m));
        const Matrix G = pf.get_matrix("G", Matrix::Zero(M, M));
        if (G.rows() != M || G.cols() != M) throw InvalidArgument("G must be M x M");
        const double delta = pf.get_double("delta", 1e-6);
        const double alpha = pf.get_double("alpha", 0.25);
        const double T = pf.get_double("T", 1.0);
        p = RiccatiProblem::constant(SpectralBasis(eigs, C), B, D, Q, R, SymOperator(G), delta, alpha, T);
    } else {
        throw InvalidArgument("unknown preset '" + preset + "'");
    }
    p.validate();
    return p;
}

GradedTimeGrid build_grid(ProblemFile& pf, const RiccatiProblem& prob) {
    const auto K = pf.get_int("K", 200);
    if (K < 2) throw InvalidArgument("K must be at least 2");
    return graded_grid(prob.horizon, static_cast<int>(K), prob.alpha);
}

MCConfig build_mc(ProblemFile& pf) {
    MCConfig mc;
    mc.paths = pf.get_int("paths", 10000);
    const long long seed = pf.get_int("seed", 1);
    if (seed < 0) throw InvalidArgument("seed must be a non-negative integer");
    mc.seed = static_cast<std::uint64_t>(seed);
    mc.steps = static_cast<int>(pf.get_int("steps", 2));
    mc.noise_channels = static_cast<int>(pf.get_int("mc_noise_channels", 0));
    mc.validate();
    return mc;
}

RiccatiSettings build_riccati_settings(ProblemFile& pf) {
    RiccatiSettings s;
    s.tol = pf.get_double("tol", s.tol);
    s.max_outer = static_cast<int>(pf.get_int("max_outer", s.max_outer));
    s.psd_slack = pf.get_double("psd_slack", s.psd_slack);
    s.lyapunov.inner_tol = pf.get_double("inner_tol", s.lyapunov.inner_tol);
    s.lyapunov.inner_max = static_cast<int>(pf.get_int("inner_max", s.lyapunov.inner_max));
    if (!(s.tol > 0.0)) throw InvalidArgument("tol must be positive");
    if (s.max_outer < 1) throw InvalidArgument("max_outer must be at least 1");
    if (!(s.lyapunov.inner_tol > 0.0) || s.lyapunov.inner_max < 1) throw InvalidArgument("invalid inner solver settings");
    return s;
}

Vector build_x0(ProblemFile& pf, int modes) {
    std::vector<double> def(static_cast<std::size_t>(modes), 0.0);
    def[0] = 1.0;
    const auto v = pf.get_list("x0", def);
    if (static_cast<int>(v.size()) != modes) throw InvalidArgument("x0 must have one entry per mode");
    return Eigen::Map<const Vector>(v.data(), modes);
}

}  // namespace spdelq
