// experiments.hpp: flat JSON device/experiment configs and the named
// experiments behind the command-line runner.

#pragma once

#include "photodet/detector.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace photodet {

using Json = nlohmann::ordered_json;

// Every recognized key with its default. Frequencies and rates are in Hz
// (cycles/s, converted with 2 pi), times in seconds; null marks a derived
// or disabled value.
Json default_config();

// Reads a flat JSON object; unknown keys are rejected.
Json load_config_file(const std::filesystem::path& path);

// defaults <- file <- overrides. Override values are parsed as JSON when
// possible, otherwise taken as strings; their type must match the default.
Json resolve_config(const std::optional<std::filesystem::path>& file,
                    const std::vector<std::pair<std::string, std::string>>& overrides);

// Canonical dump (keys sorted) and its FNV-1a 64-bit hash as 16 hex digits.
std::string canonical_config(const Json& config);
std::string config_hash(const Json& config);

CircuitParams params_from_config(const Json& config);

// eps_w from the config: explicit epsilon_w_hz, else inverted from reset_time_s.
double reset_drive_from_config(const Json& config, const CircuitParams& p);

const std::vector<std::string>& experiment_names();

using Cell = std::variant<double, long long, std::string>;

struct Column {
    std::string name;
    std::string unit;
    std::string description;
};

struct ExperimentOutput {
    std::vector<Column> columns;
    std::vector<std::vector<Cell>> rows;
    Json summary = Json::object();
    std::vector<std::string> warnings;
    // Extra files: (suffix, content); written as <experiment>_<hash>_<suffix>.
    std::vector<std::pair<std::string, std::string>> extras;
};

// Throws ValidationError for unknown experiments or bad configs and
// NumericalError when a simulation cannot meet its accuracy contract.
ExperimentOutput run_experiment(const std::string& name, const Json& config, int threads = 0);

struct RunArtifacts {
    std::string hash;
    std::filesystem::path config_file, csv_file, columns_file, summary_file;
    Json summary;
};

RunArtifacts write_artifacts(const std::filesystem::path& out_dir, const std::string& experiment, const Json& config,
                             const ExperimentOutput& output);

// Doubles with 17 significant digits.
std::string format_double(double v);

}  // namespace photodet
