#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "spdelq/horizon.hpp"
#include "spdelq/mc.hpp"
#include "spdelq/riccati.hpp"

namespace spdelq {

/// Problem definition loaded from a key=value file or a flat JSON object.
///
/// Text grammar, one entry per line:
///   key = value          # comment
/// A value is a number, a word, a whitespace-separated list of numbers, or a matrix
/// written row by row with ';' between rows ("1 0; 0 1"). In JSON the same keys map to
/// numbers, strings, arrays and arrays of arrays.
///
/// Every value read through the accessors is recorded, so the run manifest lists
/// exactly the parameters a command consumed.
class ProblemFile {
public:
    static constexpr int kSchemaVersion = 1;

    static ProblemFile parse_text(const std::string& text);
    static ProblemFile parse_json(const std::string& text);
    /// Chooses the JSON loader when the first non-blank character is '{'.
    static ProblemFile load(const std::string& path);
    /// Defaults of a named preset ("anderson" or "scalar").
    static ProblemFile preset(const std::string& name);

    bool has(const std::string& key) const { return raw_.count(key) != 0; }
    void set(const std::string& key, const std::string& value);

    double get_double(const std::string& key, double fallback);
    double require_double(const std::string& key);
    long long get_int(const std::string& key, long long fallback);
    std::string get_string(const std::string& key, const std::string& fallback);
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback);
    Matrix get_matrix(const std::string& key, const Matrix& fallback);
    Matrix require_matrix(const std::string& key);

    /// FNV-1a over the sorted entries.
    std::string hash() const;
    /// Values consumed so far, in key order.
    const nlohmann::ordered_json& consumed() const noexcept { return consumed_; }

private:
    void check_keys() const;
    const std::string* find(const std::string& key) const;

    std::map<std::string, std::string> raw_;
    nlohmann::ordered_json consumed_ = nlohmann::ordered_json::object();
};

/// Matrix literal "a b; c d".
Matrix parse_matrix(const std::string& text);

RiccatiProblem build_problem(ProblemFile& pf);
GradedTimeGrid build_grid(ProblemFile& pf, const RiccatiProblem& prob);
MCConfig build_mc(ProblemFile& pf);
RiccatiSettings build_riccati_settings(ProblemFile& pf);
/// Initial state from "x0" (defaults to the first mode).
Vector build_x0(ProblemFile& pf, int modes);

}  // namespace spdelq
