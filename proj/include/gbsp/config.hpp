#pragma once

#include "gbsp/hessian.hpp"
#include "gbsp/measure.hpp"
#include "gbsp/resonant.hpp"
#include "gbsp/series.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gbsp {

/// Validation failure; `key` is the dotted path of the offending entry.
struct ConfigError : ArgumentError {
    ConfigError(std::string key_path, const std::string& message)
        : ArgumentError(key_path + ": " + message), key(std::move(key_path)) {}
    std::string key;
};

struct SurfaceSpec {
    std::string builtin;         // empty for an explicit polynomial
    std::vector<double> params;
};

struct RunConfig {
    int n = 3;
    SurfaceSpec surface_spec;
    Hypersurface surface = make_builtin("paraboloid");
    Shift shift;
    ApproxFunction psi = ApproxFunction::power(3.0);
    DimensionFunction f = DimensionFunction::power(2.5);
    Box window_box;
    long long q_min = 1;
    long long q_max = 64;
    int hessian_res = 64;
    int probe_res = 32;
    std::vector<double> box_scales{0.25, 0.125, 0.0625, 0.03125};
    std::vector<int> refinements{16, 32, 64};
    double eps_grad = 1e-3;
    double tol_rel = 1e-9;
    double series_margin = 0.05;
    SeriesMode series_mode = SeriesMode::Gbsp;
    std::string output_dir;
    int threads = 1;
    std::uint64_t seed = 0;
    bool strict_condition_I = true;
    int samples_per_shell = 16;
    double fiber_step = 0.01;
    double fiber_max_len = 2.0;
    long long budget = 0;

    [[nodiscard]] CompactWindow window() const { return CompactWindow(surface.domain(), window_box); }
    [[nodiscard]] ProblemSetup setup() const { return {surface, shift, psi, f, window()}; }
};

/// Commands that price slabs and therefore require condition (I).
bool command_requires_condition_I(const std::string& command);

/// Strict structural and invariant validation. `command` selects the
/// condition-(I) gate; without it the gate always applies (when strict).
RunConfig validate_config(const nlohmann::json& doc, const std::optional<std::string>& command = {});
RunConfig load_config(const std::string& path, const std::optional<std::string>& command = {});

struct RunOverrides {
    std::optional<long long> qmax;
    std::optional<std::string> out;
    std::optional<int> threads;
    std::optional<long long> p;
    std::optional<IntVec> q;
    std::optional<std::vector<double>> seed_point;
};

/// Report files (name -> contents) plus the process exit status.
struct RunResult {
    int exit_code = 0;
    std::map<std::string, std::string> files;
    std::string message;
};

const std::vector<std::string>& command_names();

/// Runs one command; never writes to disk. Exit 0 success, 2 validation
/// error, 3 budget exhaustion (partial files still returned).
RunResult run_command(const std::string& command, const RunConfig& config, const RunOverrides& overrides = {});

/// Writes result files below `dir` (created if missing).
void write_reports(const RunResult& result, const std::string& dir);

}  // namespace gbsp
