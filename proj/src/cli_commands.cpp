#include "odassim/cli.h"

#include "odassim/analysis.h"
#include "odassim/errors.h"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <fmt/format.h>

namespace odassim::cli {

namespace {

namespace fs = std::filesystem;

std::string num(double x) { return fmt::format("{:.10g}", x); }

std::string mode_name(Mode m) {
    switch (m) {
    case Mode::simulate:
        return "simulate";
    case Mode::assimilate:
        return "assimilate";
    case Mode::forecast:
        return "forecast";
    case Mode::county_stats:
        return "county-stats";
    }
    return "";
}

struct Output {
    std::string name;
    std::string body;
};

class Metadata {
  public:
    explicit Metadata(const RunConfig &config) {
        text_ = fmt::format("# tool: {}\n# mode: {}\n# preset: {}\n# config_hash: {}\n# seed: {}\n", tool_version,
                            mode_name(config.mode), config.region.name, config_hash(config), config.seed);
    }
    void data(const std::string &role, const std::string &path) {
        text_ += path == "synthetic" ? fmt::format("# data: {}=synthetic\n", role)
                                     : fmt::format("# data: {}={} {}\n", role, path, file_digest(path));
    }
    void note(const std::string &key, const std::string &value) { text_ += fmt::format("# {}: {}\n", key, value); }
    const std::string &text() const { return text_; }

  private:
    std::string text_;
};

PopulationSurface load_population(const RunConfig &config, Metadata &meta, int last_year_needed) {
    if (!config.population) {
        throw ConfigError("this mode needs a population file (population=PATH or population=synthetic)");
    }
    PopulationTable table;
    if (*config.population == "synthetic") {
        const int first = config.region.first_year;
        table = synthetic_population(first, std::max(first + 2, last_year_needed - 3), config.region.initial.n0_total);
    } else {
        table = parse_population_file(*config.population);
    }
    meta.data("population", *config.population);
    meta.note("population_extrapolation", PopulationSurface::extrapolation_rule());
    return fit_surface(table);
}

void write_outputs(const RunConfig &config, const Metadata &meta, const std::vector<Output> &outputs) {
    fs::create_directories(config.out_dir);
    for (const auto &o : outputs) {
        const auto path = fs::path(config.out_dir) / o.name;
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw ConfigError("cannot write '" + path.string() + "'");
        }
        out << meta.text() << o.body;
    }
}

int cmd_simulate(const RunConfig &config) {
    Metadata meta(config);
    const auto population = load_population(config, meta, config.horizon);
    SimulationSetup setup{config.filter.grid, config.region.params, config.region.initial, config.region.first_year,
                          config.horizon, config.filter.dt, config.attribution};
    const auto years = simulate(setup, population);
    std::string body = "year\tage\tn\tannual_deaths\n";
    for (const auto &y : years) {
        for (std::size_t j = 0; j < setup.grid.n_a; ++j) {
            body += fmt::format("{}\t{}\t{}\t{}\n", y.year, num(setup.grid.age(j)), num(y.density[j]),
                                num(y.annual_deaths[j]));
        }
    }
    write_outputs(config, meta, {{"simulation.tsv", body}});
    return years.empty() ? empty_result : ok;
}

/// Observed deaths re-binned to the display scheme; absent when any contributing bin is.
std::vector<std::optional<double>> rebin(const std::vector<std::optional<double>> &observed,
                                         const AgeBinScheme &from, const AgeBinScheme &to) {
    std::vector<std::optional<double>> out(to.size(), 0.0);
    std::vector<double> covered(to.size(), 0.0);
    for (std::size_t k = 0; k < from.size(); ++k) {
        const auto target = to.enclosing(from.lo(k), from.hi(k));
        if (!target) {
            continue;
        }
        covered[*target] += from.hi(k) - from.lo(k);
        if (observed[k] && out[*target]) {
            *out[*target] += *observed[k];
        } else {
            out[*target].reset();
        }
    }
    for (std::size_t k = 0; k < to.size(); ++k) {
        if (std::abs(covered[k] - (to.hi(k) - to.lo(k))) > 1e-9) {
            out[k].reset();
        }
    }
    return out;
}

int cmd_filter(const RunConfig &config) {
    Metadata meta(config);
    const auto &region = config.region;
    ObservationSeries observations{region.scheme, {}, {}, {}, {}};
    std::optional<TwinData> twin;

    if (!config.twin_experiment && !config.fatalities) {
        throw ConfigError("this mode needs a fatality file (fatalities=PATH) or --twin-experiment");
    }
    if (!config.twin_experiment) {
        observations = parse_fatalities_file(*config.fatalities, region.scheme);
        for (const auto &w : observations.warnings) {
            std::cerr << "warning: " << (w.line ? fmt::format("line {}: ", w.line) : "") << w.message << '\n';
        }
        meta.data("fatalities", *config.fatalities);
    }
    const int data_end = config.twin_experiment ? config.twin.last_year : observations.last_year();
    const int needed = std::max(data_end, config.mode == Mode::forecast ? config.horizon : data_end);
    const auto population = load_population(config, meta, needed);
    if (config.twin_experiment) {
        twin = generate_twin(config.twin, population);
        observations = twin->observations;
        meta.note("observations", "synthetic twin experiment");
    }
    const int last_observed = observations.last_year();
    if (last_observed < region.first_year) {
        throw ConfigError("no observations at or after the first year " + std::to_string(region.first_year));
    }
    const int horizon = config.mode == Mode::forecast ? config.horizon : last_observed;
    if (horizon < last_observed) {
        throw ConfigError(fmt::format("horizon {} precedes the last observed year {}", horizon, last_observed));
    }

    AssimilationSetup setup;
    setup.params = region.params;
    setup.baseline = region.params.mortality;
    setup.initial = region.initial;
    setup.first_year = region.first_year;
    setup.horizon = horizon;
    setup.display_scheme = region.display;
    const auto result = run_assimilation(&observations, config.filter, setup, population);
    for (const auto &w : result.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    meta.note("ensemble_size", std::to_string(config.filter.ensemble_size));

    std::string params = "year\tmu_d\tsigma_mu_d\tr1\tsigma_r1\tr2\tsigma_r2\ta1max\tsigma_a1max\ta2max\tsigma_a2max\t"
                         "updated\n";
    std::string fit = "year\tbin_lo\tbin_hi\tpredicted_deaths\tsigma\tobserved_deaths\n";
    std::string forecast = "year\tbin_lo\tbin_hi\tmean\tsigma\tlower_3sigma\tupper_3sigma\n";
    const auto &display = region.display;
    for (const auto &y : result.years) {
        params += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", y.year, num(y.mu_d),
                              num(y.sigma_mu_d), num(y.r1), num(y.sigma_r1), num(y.r2), num(y.sigma_r2),
                              num(y.a1max), num(y.sigma_a1max), num(y.a2max), num(y.sigma_a2max),
                              y.updated ? 1 : 0);
        if (!y.forecast_only) {
            const auto observed =
                y.observed.empty() ? std::vector<std::optional<double>>(display.size())
                                   : rebin(y.observed, observations.scheme, display);
            for (std::size_t k = 0; k < display.size(); ++k) {
                fit += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", y.year, num(display.lo(k)), num(display.hi(k)),
                                   num(y.display.mean[k]), num(y.display.sigma[k]),
                                   observed[k] ? num(*observed[k]) : "NA");
            }
        } else {
            for (std::size_t k = 0; k < display.size(); ++k) {
                const double m = y.display.mean[k];
                const double s = y.display.sigma[k];
                forecast += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", y.year, num(display.lo(k)),
                                        num(display.hi(k)), num(m), num(s), num(std::max(0.0, m - 3.0 * s)),
                                        num(m + 3.0 * s));
            }
        }
    }

    std::vector<Output> outputs{{"params.tsv", params}};
    if (config.mode == Mode::assimilate) {
        outputs.push_back({"fit.tsv", fit});
    } else {
        outputs.push_back({"forecast.tsv", forecast});
    }
    if (twin) {
        std::string truth = "year\tmu_d\ta1max\n";
        for (std::size_t i = 0; i < twin->truth.years.size(); ++i) {
            truth += fmt::format("{}\t{}\t{}\n", twin->truth.years[i], num(twin->truth.mu_d[i]),
                                 num(twin->truth.a1max[i]));
        }
        outputs.push_back({"twin_truth.tsv", truth});
    }
    write_outputs(config, meta, outputs);
    return ok;
}

int cmd_county_stats(const RunConfig &config) {
    Metadata meta(config);
    if (!config.counties) {
        throw ConfigError("county-stats needs a county file (counties=PATH)");
    }
    const auto table = parse_county_file(*config.counties, config.strict_reliability);
    for (const auto &w : table.warnings) {
        std::cerr << "warning: line " << w.line << ": " << w.message << '\n';
    }
    meta.data("counties", *config.counties);
    const std::string filter =
        fmt::format("{},min_deaths={}", config.strict_reliability ? "strict" : "all", num(config.min_deaths));
    meta.note("filter", filter);

    std::string gini = "year\tn_counties\tgini\tmean_crude_rate\tfilter\n";
    std::string top = "year\tranking\trank\tcounty_id\tcounty_name\tdeaths\tpopulation\tcrude_rate\n";
    std::string hist = "year\tbin_lo\tbin_hi\tcount\n";
    std::size_t nonempty = 0;
    for (int year : county_years(table)) {
        const auto slice = build_slice(table, year, {config.min_deaths, config.strict_reliability});
        if (slice.counties.empty()) {
            continue;
        }
        ++nonempty;
        if (slice.counties.size() >= 2) {
            gini += fmt::format("{}\t{}\t{}\t{}\t{}\n", year, slice.counties.size(), num(gini_index(slice)),
                                num(mean_crude_rate(slice)), filter);
        }
        for (auto [by, label] : {std::pair{RankBy::deaths, "deaths"}, std::pair{RankBy::crude_rate, "crude_rate"}}) {
            const auto ranked = top_counties(slice, config.top_k, by);
            for (std::size_t i = 0; i < ranked.size(); ++i) {
                const auto &c = ranked[i];
                top += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", year, label, i + 1, c.county_id,
                                   c.county_name, num(c.deaths), num(c.population), num(c.crude_rate));
            }
        }
        std::vector<double> rates;
        double max_rate = 0.0;
        for (const auto &c : slice.counties) {
            rates.push_back(c.crude_rate);
            max_rate = std::max(max_rate, c.crude_rate);
        }
        std::vector<double> edges;
        for (double e = 0.0; e <= max_rate + config.hist_width; e += config.hist_width) {
            edges.push_back(e);
        }
        const auto counts = histogram(rates, edges);
        for (std::size_t k = 0; k < counts.size(); ++k) {
            hist += fmt::format("{}\t{}\t{}\t{}\n", year, num(edges[k]), num(edges[k + 1]), counts[k]);
        }
    }
    if (nonempty == 0) {
        std::cerr << "error: no county passes the reliability and significance filters\n";
        return empty_result;
    }
    write_outputs(config, meta, {{"gini.tsv", gini}, {"top.tsv", top}, {"hist.tsv", hist}});
    return ok;
}

} // namespace

int execute(const RunConfig &config) {
    switch (config.mode) {
    case Mode::simulate:
        return cmd_simulate(config);
    case Mode::assimilate:
    case Mode::forecast:
        return cmd_filter(config);
    case Mode::county_stats:
        return cmd_county_stats(config);
    }
    return config_error;
}

int run(int argc, const char *const *argv) {
    CLI::App app{"Age-structured overdose model with ensemble Kalman filter assimilation", "odassim"};
    std::string mode, config_path, preset_name, out, population, fatalities, counties;
    std::optional<long long> seed, horizon;
    std::optional<bool> strict;
    bool twin = false;
    std::vector<std::string> overrides;
    app.add_option("--mode", mode, "simulate | assimilate | forecast | county-stats");
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--preset", preset_name, "nationwide | la-county | cook-county | nyc");
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--horizon", horizon, "last forecast year");
    app.add_option("--out", out, "output directory");
    app.add_option("--population", population, "population file, or 'synthetic'");
    app.add_option("--fatalities", fatalities, "fatality file");
    app.add_option("--counties", counties, "county file");
    app.add_flag("--strict-reliability,!--no-strict-reliability", strict,
                 "drop rows with any unreliable entry (default on)");
    app.add_flag("--twin-experiment", twin, "assimilate synthetic observations generated by the model");
    app.add_option("--set", overrides, "extra key=value setting (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        std::map<std::string, std::string> settings;
        if (!config_path.empty()) {
            settings = read_config_file(config_path);
        }
        auto put = [&](const char *key, const std::string &value) {
            if (!value.empty()) {
                settings[key] = value;
            }
        };
        put("mode", mode);
        put("preset", preset_name);
        put("out", out);
        put("population", population);
        put("fatalities", fatalities);
        put("counties", counties);
        if (seed) {
            settings["seed"] = std::to_string(*seed);
        }
        if (horizon) {
            settings["horizon"] = std::to_string(*horizon);
        }
        if (strict) {
            settings["strict_reliability"] = *strict ? "true" : "false";
        }
        if (twin) {
            settings["twin_experiment"] = "true";
        }
        for (const auto &kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("--set expects key=value, got '" + kv + "'");
            }
            settings[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
        if (!settings.count("mode")) {
            throw ConfigError("no mode given (--mode or mode= in the config file)");
        }
        return execute(build_config(settings));
    } catch (const ConfigError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    } catch (const IngestError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    } catch (const InterfaceError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    } catch (const NumericalError &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const std::domain_error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    } catch (const std::invalid_argument &e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    }
}

} // namespace odassim::cli
