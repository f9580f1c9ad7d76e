#pragma once

#include "dissode/applications.hpp"
#include "dissode/lchs.hpp"
#include "dissode/time_marching.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace dissode {

/// Configuration problems (unknown keys, bad kinds, missing fields).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An emitted quantity violated its stated tolerance or bound.
struct ToleranceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::string> provenance;  // per column: emulated|reference|bound|literature|config
    std::vector<std::vector<std::string>> rows;
    std::map<std::string, std::string> metadata;  // config hash, seed, wall-time, ...
};

/// Shortest round-trip decimal with up to 17 significant digits.
std::string format_g17(double x);

/// UTF-8 CSV: header row, '.' decimal, no separators, no trailing newline
/// variance. Deterministic for a fixed table.
std::string to_csv(const ResultTable& table);
void write_csv(const ResultTable& table, const std::string& path);

/// JSON sidecar next to the CSV (path + ".json"): config echo, metadata,
/// column provenance. Wall-time lives only here.
void write_sidecar(const ResultTable& table, const nlohmann::json& config_echo,
                   const std::string& csv_path, double wall_seconds);

/// FNV-1a of the canonical config dump, hex-encoded.
std::string config_hash(const nlohmann::json& config);

struct ExperimentConfig {
    std::string kind;
    nlohmann::json raw;       // full config echo
    nlohmann::json problem;   // problem spec or preset reference
    nlohmann::json options;   // kind-specific knobs
    uint64_t seed = 2024;
    std::string out;          // CSV path; empty -> stdout only
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Named dissipative demo problems: "constant" (diag(-1,-2)),
/// "linear-ramp", "sinusoidal", "random-dissipative" (seeded dim-4).
ODEProblem preset_problem(const std::string& name, uint64_t seed, double T);

/// Problem from a JSON spec: {"preset": name} or inline
/// {"kind": "reaction-diffusion"|"non-hermitian"|"random", ...}.
ODEProblem problem_from_json(const nlohmann::json& spec, uint64_t seed);

/// Columns t, phi_0t, phi_tT, bound_0t, bound_tT on an even grid; every norm
/// sample must stay below its bound + 1e-9. Refuses non-dissipative input.
ResultTable emit_decay_curves(const ODEProblem& problem, int grid_points);

/// Per-level measured error vs reference plus the method's predicted budget
/// and the empirical order between consecutive levels.
/// method: "dyson-order" | "lchs-k" | "quadrature-n".
ResultTable convergence_study(const ODEProblem& problem, const std::string& method,
                              const std::vector<double>& ladder);

/// Estimator table in the shape methods x scenarios; QLSP rows are
/// literature placeholders, the two implemented rows are formula values.
ResultTable estimate_table(double alpha_A, double T, std::optional<double> eta,
                           double eps_tol, double norm_ratio, double beta);

/// Query counts vs T for one method/scenario; dissipative cells must have
/// zero variance across T.
ResultTable scan_T(const std::string& method, const std::string& scenario_tag,
                   const std::vector<double>& t_list, double alpha_A,
                   std::optional<double> eta, double eps_tol, double norm_ratio, double beta);

Scenario scenario_from_tag(const std::string& tag);

/// Dispatch on config.kind, write CSV + sidecar when out is set.
ResultTable run(const ExperimentConfig& config);

/// Full CLI: subcommands run/decay/scan-t/estimate/convergence.
/// Returns 0 on success, 2 on configuration errors, 3 on tolerance failures.
int cli_main(int argc, char** argv);

}  // namespace dissode
