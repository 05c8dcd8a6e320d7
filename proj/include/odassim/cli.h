#pragma once

#include "odassim/filter.h"
#include "odassim/twin.h"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace odassim::cli {

inline constexpr const char *tool_version = "odassim 1.0.0";

enum class Mode { simulate, assimilate, forecast, county_stats };

/// Region defaults: initial values, start year, noise scales, bin scheme.
struct Preset {
    std::string name;
    InitialCondition initial;
    ModelParams params;
    int first_year;
    int horizon;
    std::size_t ensemble_size;
    double q_scale;
    double r_diag;
    AgeBinScheme scheme;
    AgeBinScheme display;
};

/// nationwide, la-county, cook-county, nyc.
Preset preset(const std::string &name);
std::vector<std::string> preset_names();

struct RunConfig {
    Mode mode = Mode::simulate;
    Preset region = preset("nationwide");
    std::optional<std::string> population; ///< path or "synthetic"
    std::optional<std::string> fatalities;
    std::optional<std::string> counties;
    std::uint64_t seed = 20240101;
    int horizon = 2024;
    std::string out_dir = ".";
    bool strict_reliability = true;
    bool twin_experiment = false;
    double min_deaths = 10.0;
    std::size_t top_k = 3;
    double hist_width = 5.0;
    DeathAttribution attribution = DeathAttribution::drug;
    FilterConfig filter;
    TwinSetup twin;
    /// Effective key=value settings, used for the config hash.
    std::map<std::string, std::string> settings;
};

/// Keys accepted in config files and by --set.
const std::vector<std::string> &known_keys();

/// Parses `key=value` lines; '#' starts a comment. Throws ConfigError.
std::map<std::string, std::string> read_config_file(const std::string &path);

/// Builds a run configuration from merged settings (preset first, then
/// explicit keys). Throws ConfigError on unknown keys or bad values.
RunConfig build_config(const std::map<std::string, std::string> &settings);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string &bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::string file_digest(const std::string &path);
/// Hash of all settings except the output directory.
std::string config_hash(const RunConfig &config);

/// Exit codes.
enum Exit : int { ok = 0, config_error = 2, empty_result = 3, numerical_failure = 4 };

/// Executes one mode and writes its output files; returns an exit code.
int execute(const RunConfig &config);

/// Full command-line entry: parses flags, runs, reports errors on stderr.
int run(int argc, const char *const *argv);

} // namespace odassim::cli
