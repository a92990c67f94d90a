#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "weakline/polynomial_symbol.hpp"
#include "weakline/scenario.hpp"

namespace weakline::cli {

enum class Command { exact, semiclassical, gf, pointer, compare, sweep };
enum class Format { csv, json };

const char* command_name(Command c);
Command command_from_name(const std::string& name);

struct SweepSpec {
    std::string param;  // hbar | t_end | alpha | g
    std::vector<double> values;

    bool operator==(const SweepSpec&) const = default;
};

struct RunRequest {
    Command command = Command::exact;
    std::string scenario_path;
    std::string observable = "q";
    std::vector<double> times;  // empty -> window midpoint
    std::optional<SweepSpec> sweep;
    std::string output_path;
    Format format = Format::csv;
    std::uint64_t seed = 0;

    // engine knobs
    double epsilon = 1e-5;        // gf source strength
    double bin_width = 0.0;       // gf bin width; 0 -> (t''-t')/64
    double sigma = 10.0;          // pointer spread
    std::vector<double> g_ladder = {0.04, 0.02, 0.01, 0.005};
    int fock_dim = 0;             // 0 -> recommended dim (floor 24)

    bool operator==(const RunRequest&) const = default;
};

struct ResultRecord {
    std::string method;
    double t = 0.0;
    std::string sweep_param;  // empty when the record is not part of a sweep
    std::optional<double> sweep_value;
    std::optional<double> re_w;
    std::optional<double> im_w;
    std::optional<double> overlap_abs;
    std::optional<double> residual;
    std::optional<double> caustic_indicator;
    std::optional<bool> multi_root_flag;
    std::optional<double> abs_diff;
    double wallclock_ms = 0.0;
    std::string status = "ok";

    bool operator==(const ResultRecord&) const = default;
};

struct RunOutput {
    std::vector<ResultRecord> records;
    bool abs_diff_column = false;  // compare-style outputs carry abs_diff
    int exit_code = 0;
    std::string error_line;  // "ERROR <code> <message>" when exit_code != 0
};

// Parsed observable: a Pauli tag for spin scenarios or a polynomial symbol.
struct Observable {
    enum class Kind { pauli_x, pauli_y, pauli_z, identity, symbol };
    Kind kind = Kind::symbol;
    PolynomialSymbol symbol;
};

// "sigma_x" | "sigma_y" | "sigma_z" | "identity"/"I"/"1" | polynomial text
// such as "q", "p", "0.5q^2+0.5p^2", "0.2*q^4".
Observable parse_observable(const std::string& spec);

// Computes every record (parallel across sweep values, capped by
// WEAKLINE_THREADS). Per-record solver errors become status entries and an
// overall nonzero exit code; validation problems throw ValidationError.
RunOutput execute(const RunRequest& req);

// execute + write the output file + print the stderr diagnostic on failure.
// Returns the process exit code (0 ok, 2 validation, 3 no-convergence,
// 4 orthogonal postselection).
int run(const RunRequest& req);

std::string to_csv(const RunRequest& req, const RunOutput& out);
nlohmann::json to_json(const RunRequest& req, const RunOutput& out);
// Inverse of to_json, for round-trip checks and downstream tooling.
std::pair<RunRequest, std::vector<ResultRecord>> from_json(const nlohmann::json& j);

// Regenerates the golden runs and diffs them field-wise (wallclock excluded)
// against the committed reference CSVs. update == true rewrites the refs.
int run_goldens(const std::string& scenario_dir, const std::string& ref_dir, bool update,
                std::ostream& log);

// Full command-line front end.
int main_entry(int argc, char** argv);

}  // namespace weakline::cli
