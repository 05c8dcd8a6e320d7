#include "odassim/cli.h"

#include "odassim/errors.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace odassim::cli {

namespace {

std::string trim(const std::string &s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

double to_double(const std::string &key, const std::string &value) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
    }
    return out;
}

long long to_integer(const std::string &key, const std::string &value) {
    long long out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
    }
    return out;
}

bool to_bool(const std::string &key, const std::string &value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no" || value == "off") {
        return false;
    }
    throw ConfigError("'" + key + "' expects true or false, got '" + value + "'");
}

Mode to_mode(const std::string &value) {
    if (value == "simulate") {
        return Mode::simulate;
    }
    if (value == "assimilate") {
        return Mode::assimilate;
    }
    if (value == "forecast") {
        return Mode::forecast;
    }
    if (value == "county-stats") {
        return Mode::county_stats;
    }
    throw ConfigError("unknown mode '" + value + "' (simulate, assimilate, forecast, county-stats)");
}

Preset county_preset(std::string name, double n0, double alpha0, double mu_d, double r, double alpha1,
                     double alpha2, int first_year, std::size_t members) {
    Preset p{std::move(name), {}, {}, first_year, 2024, members, 1e-8, 1e-7,
             AgeBinScheme::county_ten_year(), AgeBinScheme::county_ten_year()};
    p.initial.n0_total = n0;
    p.initial.alpha0 = alpha0;
    p.params.mortality.mu_d = mu_d;
    p.params.influx.r1 = p.params.influx.r2 = r;
    p.params.influx.alpha1 = alpha1;
    p.params.influx.alpha2 = alpha2;
    return p;
}

} // namespace

Preset preset(const std::string &name) {
    if (name == "nationwide") {
        Preset p{name, {}, {}, 1999, 2024, 1000, 1e-4, 2e-3, AgeBinScheme::nationwide(), AgeBinScheme::five_year()};
        p.params.mortality.mu_d = 2e-3;
        return p;
    }
    if (name == "la-county") {
        return county_preset(name, 9437290.0, 17.0, 2.5e-3, 0.02, 17.0, 17.0, 1999, 1000);
    }
    if (name == "cook-county") {
        return county_preset(name, 5240700.0, 12.0, 5e-3, 0.06, 8.0, 15.0, 2013, 100);
    }
    if (name == "nyc") {
        return county_preset(name, 8405837.0, 12.0, 5e-3, 0.06, 8.0, 17.0, 2013, 100);
    }
    throw ConfigError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"nationwide", "la-county", "cook-county", "nyc"}; }

const std::vector<std::string> &known_keys() {
    static const std::vector<std::string> keys{
        "mode",          "preset",        "population",       "fatalities",      "counties",
        "seed",          "horizon",       "out",              "strict_reliability", "twin_experiment",
        "min_deaths",    "top_k",         "hist_width",       "attribution",     "ensemble_size",
        "dt",            "quadrature_step", "p0_state",       "p0_param",        "q_scale",
        "r_diag",        "warmup_cycles", "window_lo",        "window_hi",       "reanchor_mu_d",
        "first_year",    "n0",            "prevalence",       "alpha0",          "beta0",
        "mu_d",          "r1",            "r2",               "alpha1",          "beta1",
        "alpha2",        "beta2",         "twin_last_year",   "twin_mu_d_start", "twin_mu_d_end",
        "twin_a1max_start", "twin_a1max_end", "twin_seed",
    };
    return keys;
}

std::map<std::string, std::string> read_config_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(fmt::format("{}:{}: expected key=value", path, number));
        }
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

RunConfig build_config(const std::map<std::string, std::string> &settings) {
    const auto &keys = known_keys();
    for (const auto &[key, value] : settings) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError("unknown configuration key '" + key + "'");
        }
    }
    auto get = [&](const std::string &key) -> std::optional<std::string> {
        if (auto it = settings.find(key); it != settings.end()) {
            return it->second;
        }
        return std::nullopt;
    };

    RunConfig c;
    c.settings = settings;
    c.region = preset(get("preset").value_or("nationwide"));
    auto &region = c.region;
    if (auto v = get("mode")) {
        c.mode = to_mode(*v);
    }
    c.population = get("population");
    c.fatalities = get("fatalities");
    c.counties = get("counties");
    if (auto v = get("seed")) {
        c.seed = static_cast<std::uint64_t>(to_integer("seed", *v));
    }
    if (auto v = get("first_year")) {
        region.first_year = static_cast<int>(to_integer("first_year", *v));
    }
    c.horizon = region.horizon;
    if (auto v = get("horizon")) {
        c.horizon = static_cast<int>(to_integer("horizon", *v));
    }
    if (auto v = get("out")) {
        c.out_dir = *v;
    }
    if (auto v = get("strict_reliability")) {
        c.strict_reliability = to_bool("strict_reliability", *v);
    }
    if (auto v = get("twin_experiment")) {
        c.twin_experiment = to_bool("twin_experiment", *v);
    }
    if (auto v = get("min_deaths")) {
        c.min_deaths = to_double("min_deaths", *v);
    }
    if (auto v = get("top_k")) {
        c.top_k = static_cast<std::size_t>(std::max(0LL, to_integer("top_k", *v)));
    }
    if (auto v = get("hist_width")) {
        c.hist_width = to_double("hist_width", *v);
        if (!(c.hist_width > 0.0)) {
            throw ConfigError("hist_width must be positive");
        }
    }
    if (auto v = get("attribution")) {
        if (*v == "drug") {
            c.attribution = DeathAttribution::drug;
        } else if (*v == "all_cause") {
            c.attribution = DeathAttribution::all_cause;
        } else {
            throw ConfigError("attribution must be drug or all_cause");
        }
    }

    auto set_double = [&](const char *key, double &target) {
        if (auto v = get(key)) {
            target = to_double(key, *v);
        }
    };
    set_double("n0", region.initial.n0_total);
    set_double("prevalence", region.initial.prevalence);
    set_double("alpha0", region.initial.alpha0);
    set_double("beta0", region.initial.beta0);
    set_double("mu_d", region.params.mortality.mu_d);
    set_double("r1", region.params.influx.r1);
    set_double("r2", region.params.influx.r2);
    set_double("alpha1", region.params.influx.alpha1);
    set_double("beta1", region.params.influx.beta1);
    set_double("alpha2", region.params.influx.alpha2);
    set_double("beta2", region.params.influx.beta2);
    try {
        region.initial.validate();
        region.params.mortality.validate();
        region.params.influx.validate();
    } catch (const std::domain_error &e) {
        throw ConfigError(e.what());
    }

    auto &f = c.filter;
    f.ensemble_size = region.ensemble_size;
    f.q_scale = region.q_scale;
    f.r_diag = region.r_diag;
    f.seed = c.seed;
    f.attribution = c.attribution;
    if (auto v = get("ensemble_size")) {
        f.ensemble_size = static_cast<std::size_t>(std::max(0LL, to_integer("ensemble_size", *v)));
    }
    set_double("dt", f.dt);
    set_double("quadrature_step", f.quadrature_step);
    set_double("p0_state", f.p0_state);
    set_double("p0_param", f.p0_param);
    set_double("q_scale", f.q_scale);
    set_double("r_diag", f.r_diag);
    set_double("window_lo", f.window_lo);
    set_double("window_hi", f.window_hi);
    if (auto v = get("warmup_cycles")) {
        f.warmup_cycles = static_cast<int>(to_integer("warmup_cycles", *v));
    }
    if (auto v = get("reanchor_mu_d")) {
        f.reanchor_mu_d = to_bool("reanchor_mu_d", *v);
    }
    f.validate();

    auto &t = c.twin;
    t.truth = region.params;
    t.initial = region.initial;
    t.grid = f.grid;
    t.scheme = region.scheme;
    t.first_year = region.first_year;
    t.last_year = region.first_year + 22;
    t.dt = f.dt;
    t.r_diag = f.r_diag;
    t.seed = c.seed + 1;
    if (auto v = get("twin_last_year")) {
        t.last_year = static_cast<int>(to_integer("twin_last_year", *v));
    }
    set_double("twin_mu_d_start", t.mu_d_start);
    set_double("twin_mu_d_end", t.mu_d_end);
    set_double("twin_a1max_start", t.a1max_start);
    set_double("twin_a1max_end", t.a1max_end);
    if (auto v = get("twin_seed")) {
        t.seed = static_cast<std::uint64_t>(to_integer("twin_seed", *v));
    }
    if (c.horizon < region.first_year) {
        throw ConfigError("horizon precedes the first year");
    }
    return c;
}

std::uint64_t fnv1a(const std::string &bytes, std::uint64_t hash) {
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string file_digest(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'");
    }
    std::ostringstream bytes;
    bytes << in.rdbuf();
    return fmt::format("fnv1a64:{:016x}", fnv1a(bytes.str()));
}

std::string config_hash(const RunConfig &config) {
    std::string canonical;
    for (const auto &[key, value] : config.settings) {
        if (key != "out") {
            canonical += key + '=' + value + '\n';
        }
    }
    return fmt::format("fnv1a64:{:016x}", fnv1a(canonical));
}

} // namespace odassim::cli
