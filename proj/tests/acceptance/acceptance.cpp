// Acceptance runner: one PASS / FAIL / SKIPPED line per criterion.
//
//   acceptance [--work-dir DIR] [--only N]... [--strict]
//
// Data-dependent criteria read canonical exports from $OD_ASSIM_DATA_DIR:
//   nationwide_fatalities.tsv, nationwide_population.tsv   (9, 10)
//   county_rates.tsv                                       (11, 12)
//   <preset>_fatalities.tsv, <preset>_population.tsv       (13; la-county, cook-county, nyc)

#include "odassim/analysis.h"
#include "odassim/cli.h"
#include "odassim/enkf.h"
#include "odassim/filter.h"

#include "oracles.h"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace odassim;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skipped };

struct Outcome {
    Status status;
    std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

fs::path g_work;

// --- TSV output reading -----------------------------------------------------

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t col(const std::string &name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) {
                return i;
            }
        }
        throw std::runtime_error("no column " + name);
    }
    double num(std::size_t row, const std::string &name) const { return std::stod(rows[row][col(name)]); }
};

std::vector<std::string> split(const std::string &line) {
    std::vector<std::string> out;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, '\t')) {
        out.push_back(cell);
    }
    return out;
}

Table read_tsv(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    Table t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (t.columns.empty()) {
            t.columns = split(line);
        } else {
            t.rows.push_back(split(line));
        }
    }
    return t;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "odassim");
    std::vector<const char *> argv;
    for (const auto &a : args) {
        argv.push_back(a.c_str());
    }
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

PopulationSurface synthetic_surface() { return fit_surface(synthetic_population(1999, 2021)); }

double uniform(std::mt19937_64 &rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// --- 1. characteristics vs upwind ---------------------------------------------

Outcome pde_oracle() {
    const auto pop = synthetic_surface();
    std::mt19937_64 rng(101);
    const double h = 0.04;
    const AgeGrid grid;
    double worst = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
        ModelParams p;
        p.mortality.mu_d = uniform(rng, 0.0, 0.02);
        p.influx.r1 = uniform(rng, 0.005, 0.08);
        p.influx.r2 = uniform(rng, 0.005, 0.08);
        p.influx.alpha1 = uniform(rng, 5.0, 20.0);
        p.influx.alpha2 = uniform(rng, 8.0, 25.0);
        p.influx.beta1 = uniform(rng, 0.25, 0.5);
        p.influx.beta2 = uniform(rng, 0.25, 0.5);
        InitialCondition ic;
        ic.alpha0 = uniform(rng, 8.0, 16.0);
        ic.prevalence = uniform(rng, 0.005, 0.03);
        const double origin = uniform(rng, 1999.0, 2008.0);
        const GammaProfile rho(ic);
        const SolverOptions opt{origin, 0.1};
        const auto snaps = oracle::upwind(p, ic, pop, origin, 120.0, h, {2.5, 5.0, 10.0});
        for (const auto &s : snaps) {
            double err = 0.0, scale = 0.0;
            for (std::size_t j = 0; j < grid.n_a; ++j) {
                const double a = grid.age(j);
                const double want = s.density[30 * j];
                scale = std::max(scale, std::abs(want));
                if (std::abs(a - s.time) < 2.0 * grid.delta_a) {
                    continue;
                }
                err = std::max(err, std::abs(characteristic_solution(a, s.time, rho, p, pop, opt) - want));
            }
            worst = std::max(worst, err / scale);
        }
    }
    return verdict(worst <= 1e-2, fmt::format("worst relative sup error {:.3e} over 20 draws", worst));
}

// --- 2. incomplete gamma identity ---------------------------------------------

Outcome incomplete_gamma() {
    std::mt19937_64 rng(202);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double alpha = uniform(rng, 1.5, 30.0);
        const double beta = uniform(rng, 0.1, 1.0);
        const double offset = uniform(rng, 0.0, 60.0);
        const double lo = uniform(rng, 0.0, 40.0);
        const bool open = i % 10 == 0;
        const double hi = open ? std::numeric_limits<double>::infinity() : lo + uniform(rng, 0.1, 60.0);
        const double got = influx_integral(lo, hi, offset, alpha, beta);
        const double want = oracle::integrate([&](double z) { return oracle::gamma_density(z + offset, alpha, beta); },
                                              lo, hi, 1e-14);
        if (want > 1e-300) {
            worst = std::max(worst, std::abs(got - want) / want);
        }
    }
    return verdict(worst <= 1e-10, fmt::format("worst relative error {:.3e} over 100 cases", worst));
}

// --- 3. derivatives vs central differences ------------------------------------

Outcome derivatives() {
    std::mt19937_64 rng(303);
    const auto pop = synthetic_surface();
    const ModelParams p = [] {
        ModelParams q;
        q.mortality.mu_d = 0.006;
        q.influx.alpha1 = 8.0;
        q.influx.alpha2 = 13.0;
        return q;
    }();
    const InitialCondition ic;
    auto rel = [](double got, double want, double floor) { return std::abs(got - want) / std::max(std::abs(want), floor); };
    double w_state = 0.0, w_influx = 0.0, w_rho = 0.0, w_da = 0.0, w_dt = 0.0;

    // ∂n/∂t at grid nodes against differences of the closed-form solution
    const GammaProfile rho(ic);
    const AgeGrid grid;
    const SolverOptions opt{2003.0, 0.02};
    const double n_scale = rho.value(33.0);
    for (int i = 0; i < 50; ++i) {
        std::size_t j;
        double t;
        do {
            j = std::uniform_int_distribution<std::size_t>(1, grid.n_a - 2)(rng);
            t = uniform(rng, 0.3, 9.5);
        } while (std::abs(grid.age(j) - t) < 0.1);
        const auto rates = state_derivative(rho, grid, t, p, pop, opt);
        const double e = 1e-3;
        const double fd = (characteristic_solution(grid.age(j), t + e, rho, p, pop, opt) -
                           characteristic_solution(grid.age(j), t - e, rho, p, pop, opt)) /
                          (2 * e);
        w_state = std::max(w_state, rel(rates[j], fd, 1e-3 * n_scale));
    }

    double r_scale = 0.0, rho_scale = 0.0;
    for (double a = 0.5; a < 100.0; a += 0.5) {
        r_scale = std::max(r_scale, std::abs(influx_rate_derivative(a, p.influx)));
        rho_scale = std::max(rho_scale, std::abs(initial_density_derivative(a, ic)));
    }
    for (int i = 0; i < 50; ++i) {
        const double a = uniform(rng, 0.5, 110.0), e = 1e-4;
        const double fr = (influx_rate(a + e, p.influx) - influx_rate(a - e, p.influx)) / (2 * e);
        w_influx = std::max(w_influx, rel(influx_rate_derivative(a, p.influx), fr, 1e-3 * r_scale));
        const double fi = (initial_density(a + e, ic) - initial_density(a - e, ic)) / (2 * e);
        w_rho = std::max(w_rho, rel(initial_density_derivative(a, ic), fi, 1e-3 * rho_scale));
    }

    for (int i = 0; i < 50; ++i) {
        const double a = uniform(rng, 1.0, 84.0), t = uniform(rng, 1999.5, 2020.5), e = 1e-4;
        const double floor = 1e-3 * pop.eval(a, t);
        const double fa = (pop.eval(a + e, t) - pop.eval(a - e, t)) / (2 * e);
        const double ft = (pop.eval(a, t + e) - pop.eval(a, t - e)) / (2 * e);
        w_da = std::max(w_da, rel(pop.eval_da(a, t), fa, floor));
        w_dt = std::max(w_dt, rel(pop.eval_dt(a, t), ft, floor));
    }
    const double worst = std::max({w_state, w_influx, w_rho, w_da, w_dt});
    return verdict(worst <= 1e-3, fmt::format("worst relative error: state {:.1e}, influx {:.1e}, rho {:.1e}, "
                                              "N_a {:.1e}, N_t {:.1e}",
                                              w_state, w_influx, w_rho, w_da, w_dt));
}

// --- 4. scalar EnKF convergence -----------------------------------------------

double slope(const std::vector<double> &x, const std::vector<double> &y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Outcome enkf_convergence() {
    const double m = 1.0, p = 2.0, r = 0.5, z = 2.2;
    const auto exact = oracle::kalman(m, p, z, r);
    const int reps = 200;
    std::vector<double> logm, log_mean_err, log_var_err;
    for (Eigen::Index members : {100, 1000, 10000}) {
        double se_mean = 0.0, se_var = 0.0;
        for (int rep = 0; rep < reps; ++rep) {
            Eigen::MatrixXd x(1, members), eta(1, members);
            std::normal_distribution<double> normal;
            for (Eigen::Index i = 0; i < members; ++i) {
                CounterRng rng(4000 + static_cast<std::uint64_t>(members), static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(rep), 0);
                x(0, i) = m + std::sqrt(p) * normal(rng);
                eta(0, i) = std::sqrt(r) * normal(rng);
            }
            const Eigen::MatrixXd pred = x;
            perturbed_observation_update(x, pred, Eigen::VectorXd::Constant(1, z), Eigen::MatrixXd::Constant(1, 1, r),
                                         eta);
            se_mean += std::pow(ensemble_mean(x)(0) - exact.mean, 2);
            se_var += std::pow(ensemble_covariance(x)(0, 0) - exact.variance, 2);
        }
        logm.push_back(std::log10(static_cast<double>(members)));
        log_mean_err.push_back(0.5 * std::log10(se_mean / reps));
        log_var_err.push_back(0.5 * std::log10(se_var / reps));
    }
    const double s_mean = slope(logm, log_mean_err), s_var = slope(logm, log_var_err);
    const bool ok = std::abs(s_mean + 0.5) <= 0.15 && std::abs(s_var + 0.5) <= 0.15;
    return verdict(ok, fmt::format("log-log slope: mean error {:.3f}, variance error {:.3f} ({} replications)", s_mean,
                                   s_var, reps));
}

// --- 5 and 8. twin experiment with a forecast tail ----------------------------

struct TwinRun {
    bool ran = false;
    std::string error;
    Table params, truth, forecast;
};

const TwinRun &twin_run() {
    static TwinRun run = [] {
        TwinRun r;
        const auto dir = g_work / "twin";
        const int code = run_cli({"--mode", "forecast", "--preset", "nationwide", "--population", "synthetic",
                                  "--twin-experiment", "--horizon", "2024", "--seed", "20240101", "--out",
                                  dir.string()});
        if (code != 0) {
            r.error = fmt::format("odassim exited with {}", code);
            return r;
        }
        r.params = read_tsv(dir / "params.tsv");
        r.truth = read_tsv(dir / "twin_truth.tsv");
        r.forecast = read_tsv(dir / "forecast.tsv");
        r.ran = true;
        return r;
    }();
    return run;
}

Outcome twin_experiment() {
    const auto &run = twin_run();
    if (!run.ran) {
        return {Status::fail, run.error};
    }
    std::map<int, std::pair<double, double>> truth;
    for (std::size_t i = 0; i < run.truth.rows.size(); ++i) {
        truth[static_cast<int>(run.truth.num(i, "year"))] = {run.truth.num(i, "mu_d"), run.truth.num(i, "a1max")};
    }
    int hits = 0, years = 0;
    double terminal = std::numeric_limits<double>::quiet_NaN(), a1_final = terminal, mu_final = terminal;
    for (std::size_t i = 0; i < run.params.rows.size(); ++i) {
        const int year = static_cast<int>(run.params.num(i, "year"));
        const auto it = truth.find(year);
        if (it == truth.end()) {
            continue;
        }
        ++years;
        const double mu = run.params.num(i, "mu_d"), sigma = run.params.num(i, "sigma_mu_d");
        hits += std::abs(mu - it->second.first) <= 3.0 * sigma;
        if (year == truth.rbegin()->first) {
            a1_final = run.params.num(i, "a1max");
            mu_final = mu;
            terminal = std::abs(a1_final - it->second.second);
        }
    }
    const bool ok = years > 0 && hits >= 0.9 * years && terminal <= 4.0;
    return verdict(ok, fmt::format("mu_d inside 3 sigma in {}/{} years (final {:.4f}); terminal a1max {:.2f}, "
                                   "error {:.2f} years",
                                   hits, years, mu_final, a1_final, terminal));
}

Outcome forecast_monotone() {
    const auto &run = twin_run();
    if (!run.ran) {
        return {Status::fail, run.error};
    }
    std::map<std::pair<double, double>, std::vector<std::pair<int, double>>> by_bin;
    for (std::size_t i = 0; i < run.forecast.rows.size(); ++i) {
        const auto key = std::pair{run.forecast.num(i, "bin_lo"), run.forecast.num(i, "bin_hi")};
        by_bin[key].push_back({static_cast<int>(run.forecast.num(i, "year")), run.forecast.num(i, "sigma")});
    }
    std::size_t checks = 0, violations = 0;
    std::set<std::string> where;
    for (auto &[bin, series] : by_bin) {
        std::sort(series.begin(), series.end());
        for (std::size_t k = 1; k < series.size(); ++k) {
            ++checks;
            if (series[k].second < series[k - 1].second) {
                ++violations;
                where.insert(fmt::format("{}-{}", bin.first, bin.second));
            }
        }
    }
    std::string bins;
    for (const auto &w : where) {
        bins += (bins.empty() ? " in ages " : ", ") + w;
    }
    return verdict(checks > 0 && violations == 0,
                   fmt::format("{} year-to-year comparisons over {} bins, {} decreases{}", checks, by_bin.size(),
                               violations, bins));
}

// --- 6. Gini ---------------------------------------------------------------------

Outcome gini_checks() {
    std::mt19937_64 rng(606);
    double worst = 0.0, worst_scale = 0.0;
    std::size_t out_of_bounds = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = std::uniform_int_distribution<int>(2, 8)(rng);
        CountyYearSlice s{2020, {}};
        std::vector<double> d, p;
        for (int i = 0; i < n; ++i) {
            p.push_back(std::round(uniform(rng, 1e3, 1e7)));
            d.push_back(std::round(p.back() * uniform(rng, 0.0, 1e-3)) + (i == 0 ? 1.0 : 0.0));
            s.counties.push_back({std::to_string(i), "c", d.back(), p.back(), crude_rate(d.back(), p.back())});
        }
        const double g = gini_index(s);
        worst = std::max(worst, std::abs(g - oracle::gini(d, p)));
        out_of_bounds += !(g >= 0.0 && g < 1.0);
        const double kd = uniform(rng, 0.1, 10.0), kp = uniform(rng, 0.1, 10.0);
        for (auto &c : s.counties) {
            c.deaths *= kd;
            c.population *= kp;
        }
        worst_scale = std::max(worst_scale, std::abs(gini_index(s) - g));
    }
    const bool ok = worst <= 1e-10 && worst_scale <= 1e-10 && out_of_bounds == 0;
    return verdict(ok, fmt::format("1000 slices: brute force {:.1e}, scaling {:.1e}, {} out of [0,1)", worst,
                                   worst_scale, out_of_bounds));
}

// --- 7. determinism -----------------------------------------------------------

Outcome determinism() {
    const auto counties = g_work / "det_counties.tsv";
    {
        std::ofstream out(counties);
        out << "county_id\tcounty_name\tyear\tdeaths\tpopulation\tcrude_rate\n";
        std::mt19937_64 rng(707);
        for (int year = 2019; year <= 2021; ++year) {
            for (int c = 0; c < 40; ++c) {
                const double pop = std::round(uniform(rng, 2e4, 2e6));
                const double deaths = std::round(pop * uniform(rng, 5e-5, 6e-4));
                out << fmt::format("{:05d}\tCounty {}\t{}\t{}\t{}\t{:.1f}\n", 1000 + c, c, year, deaths, pop,
                                   1e5 * deaths / pop);
            }
        }
    }
    const std::vector<std::vector<std::string>> runs{
        {"--mode", "simulate", "--population", "synthetic", "--horizon", "2004"},
        {"--mode", "forecast", "--population", "synthetic", "--twin-experiment", "--horizon", "2006", "--set",
         "ensemble_size=40", "--set", "twin_last_year=2004", "--seed", "99"},
        {"--mode", "county-stats", "--counties", counties.string()},
    };
    std::size_t files = 0, differing = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::vector<fs::path> dirs;
        for (const char *tag : {"a", "b"}) {
            dirs.push_back(g_work / fmt::format("det{}{}", i, tag));
            fs::remove_all(dirs.back());
            auto args = runs[i];
            args.insert(args.end(), {"--out", dirs.back().string()});
            if (run_cli(args) != 0) {
                return {Status::fail, fmt::format("run {} failed", i)};
            }
        }
        for (const auto &entry : fs::directory_iterator(dirs[0])) {
            ++files;
            differing += slurp(entry.path()) != slurp(dirs[1] / entry.path().filename());
        }
    }
    return verdict(files > 0 && differing == 0, fmt::format("{} output files compared, {} differ", files, differing));
}

// --- 9 to 13. real data -------------------------------------------------------

std::optional<fs::path> data_dir() {
    if (const char *d = std::getenv("OD_ASSIM_DATA_DIR"); d && *d) {
        return fs::path(d);
    }
    return std::nullopt;
}

std::optional<fs::path> data_file(const std::string &name) {
    auto dir = data_dir();
    if (!dir || !fs::exists(*dir / name)) {
        return std::nullopt;
    }
    return *dir / name;
}

Outcome skipped(const std::string &what) { return {Status::skipped, "no " + what + " in OD_ASSIM_DATA_DIR"}; }

/// Assimilates a preset's real data; params.tsv rows by year.
std::optional<std::map<int, std::map<std::string, double>>> assimilate_real(const std::string &preset) {
    const auto deaths = data_file(preset + "_fatalities.tsv");
    const auto pop = data_file(preset + "_population.tsv");
    if (!deaths || !pop) {
        return std::nullopt;
    }
    static std::map<std::string, std::map<int, std::map<std::string, double>>> cache;
    if (auto it = cache.find(preset); it != cache.end()) {
        return it->second;
    }
    const auto dir = g_work / ("real_" + preset);
    if (run_cli({"--mode", "assimilate", "--preset", preset, "--fatalities", deaths->string(), "--population",
                 pop->string(), "--out", dir.string()}) != 0) {
        throw std::runtime_error("odassim failed on " + preset + " data");
    }
    const auto t = read_tsv(dir / "params.tsv");
    std::map<int, std::map<std::string, double>> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        for (const auto &c : t.columns) {
            out[static_cast<int>(t.num(i, "year"))][c] = t.num(i, c);
        }
    }
    return cache[preset] = out;
}

Outcome nationwide_mu_d() {
    const auto rows = assimilate_real("nationwide");
    if (!rows) {
        return skipped("nationwide fatality/population files");
    }
    if (!rows->count(1999) || !rows->count(2021)) {
        return {Status::fail, "estimates for 1999 and 2021 are not both present"};
    }
    const double first = rows->at(1999).at("mu_d"), last = rows->at(2021).at("mu_d");
    const bool ok = std::abs(first - 0.002) <= 0.001 && std::abs(last - 0.015) <= 0.003;
    return verdict(ok, fmt::format("mu_d {:.4f} (1999) to {:.4f} (2021)", first, last));
}

Outcome influx_crossover() {
    const auto rows = assimilate_real("nationwide");
    if (!rows) {
        return skipped("nationwide fatality/population files");
    }
    std::optional<int> crossing;
    bool below = false;
    for (const auto &[year, v] : *rows) {
        const bool above = v.at("r1") > v.at("r2");
        if (!above) {
            below = true;
        } else if (below && !crossing) {
            crossing = year;
        }
    }
    if (!crossing) {
        return {Status::fail, "r1 never overtakes r2"};
    }
    return verdict(std::abs(*crossing - 2015) <= 2, fmt::format("r1 overtakes r2 in {}", *crossing));
}

std::optional<CountyTable> county_table() {
    const auto path = data_file("county_rates.tsv");
    if (!path) {
        return std::nullopt;
    }
    return parse_county_file(path->string(), true);
}

Outcome county_mean_rate() {
    const auto table = county_table();
    if (!table) {
        return skipped("county_rates.tsv");
    }
    const auto s2000 = build_slice(*table, 2000), s2020 = build_slice(*table, 2020);
    if (s2000.counties.empty() || s2020.counties.empty()) {
        return {Status::fail, "2000 or 2020 has no reliable counties"};
    }
    const double a = mean_crude_rate(s2000), b = mean_crude_rate(s2020);
    return verdict(std::abs(a - 4.3) <= 0.3 && std::abs(b - 31.5) <= 1.5,
                   fmt::format("mean crude rate {:.2f} (2000), {:.2f} (2020)", a, b));
}

Outcome county_gini() {
    const auto table = county_table();
    if (!table) {
        return skipped("county_rates.tsv");
    }
    const auto s2000 = build_slice(*table, 2000), s2021 = build_slice(*table, 2021);
    if (s2000.counties.size() < 2 || s2021.counties.size() < 2) {
        return {Status::fail, "2000 or 2021 has fewer than two reliable counties"};
    }
    const double a = gini_index(s2000), b = gini_index(s2021);
    return verdict(std::abs(a - 0.2) <= 0.03 && std::abs(b - 0.07) <= 0.03,
                   fmt::format("Gini {:.3f} (2000), {:.3f} (2021)", a, b));
}

Outcome county_estimates() {
    const std::vector<std::pair<std::string, double>> expected{
        {"cook-county", 0.013}, {"nyc", 0.011}, {"la-county", 0.007}};
    std::string detail;
    bool ok = true;
    std::size_t present = 0;
    for (const auto &[preset, want] : expected) {
        const auto rows = assimilate_real(preset);
        if (!rows) {
            continue;
        }
        ++present;
        if (!rows->count(2021)) {
            ok = false;
            detail += fmt::format("{}: no 2021 estimate; ", preset);
            continue;
        }
        const double got = rows->at(2021).at("mu_d");
        ok = ok && std::abs(got - want) <= 0.003;
        detail += fmt::format("{} {:.4f}; ", preset, got);
    }
    if (present < expected.size()) {
        return skipped("fatality/population files for all three counties");
    }
    detail.resize(detail.size() - 2);
    return verdict(ok, "2021 mu_d: " + detail);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Acceptance criteria runner"};
    std::string work = (fs::temp_directory_path() / "odassim_acceptance").string();
    std::vector<int> only;
    bool strict = false;
    app.add_option("--work-dir", work, "scratch directory for CLI outputs");
    app.add_option("--only", only, "run only these criteria");
    app.add_flag("--strict", strict, "exit nonzero if any criterion fails");
    CLI11_PARSE(app, argc, argv);
    g_work = work;
    fs::create_directories(g_work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"PDE oracle equivalence", pde_oracle},
        {"incomplete gamma identity", incomplete_gamma},
        {"derivative checks", derivatives},
        {"scalar EnKF convergence rate", enkf_convergence},
        {"twin experiment recovery", twin_experiment},
        {"Gini brute force, bounds, scale invariance", gini_checks},
        {"determinism", determinism},
        {"forecast uncertainty monotonicity", forecast_monotone},
        {"nationwide mu_d trajectory", nationwide_mu_d},
        {"r1/r2 crossover year", influx_crossover},
        {"mean county crude rate", county_mean_rate},
        {"county Gini index", county_gini},
        {"county 2021 mu_d estimates", county_estimates},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = {Status::fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char *label = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIPPED";
        failures += o.status == Status::fail;
        fmt::print("{:>2} {:<7} {} - {} [{:.1f}s]\n", number, label, criteria[i].first, o.detail, secs);
        std::fflush(stdout);
    }
    return strict && failures > 0 ? 1 : 0;
}
