#include "odassim/filter.h"

#include "odassim/errors.h"

#include <algorithm>
#include <cmath>

namespace odassim {

namespace {

enum Stream : std::uint64_t { init_stream = 1, process_stream, observation_stream, reanchor_stream, resample_stream };

void clamp_member(Eigen::Ref<Eigen::VectorXd> x, const StateLayout &layout) {
    for (std::size_t j = 0; j < layout.n_a; ++j) {
        x(layout.density(j)) = std::max(x(layout.density(j)), 0.0);
        x(layout.deaths(j)) = std::max(x(layout.deaths(j)), 0.0);
    }
    x(layout.density(0)) = 0.0;
}

std::vector<double> density_of(const Eigen::MatrixXd &members, const StateLayout &layout, Eigen::Index i) {
    const double *p = members.col(i).data();
    return std::vector<double>(p, p + layout.n_a);
}

BinForecast summarize(const Eigen::MatrixXd &per_thousand) {
    const Eigen::MatrixXd persons = per_thousand * 1000.0;
    BinForecast out;
    const Eigen::VectorXd mean = ensemble_mean(persons);
    const auto m = static_cast<double>(persons.cols());
    for (Eigen::Index k = 0; k < persons.rows(); ++k) {
        const double var = m > 1 ? (persons.row(k).array() - mean(k)).square().sum() / (m - 1.0) : 0.0;
        out.mean.push_back(mean(k));
        out.sigma.push_back(std::sqrt(var));
    }
    return out;
}

} // namespace

Eigen::VectorXd log_params(const ModelParams &p) {
    p.mortality.validate();
    p.influx.validate();
    const auto &q = p.influx;
    if (!(p.mortality.mu_d > 0.0) || !(q.r1 > 0.0) || !(q.r2 > 0.0)) {
        throw std::domain_error("log-transformed parameters must be positive");
    }
    Eigen::VectorXd logs(StateLayout::n_params);
    logs << std::log(p.mortality.mu_d), std::log(q.r1), std::log(q.r2), std::log(q.alpha1), std::log(q.beta1),
        std::log(q.alpha2), std::log(q.beta2);
    return logs;
}

ModelParams model_params(const Eigen::Ref<const Eigen::VectorXd> &logs, const MortalityParams &baseline) {
    ModelParams p;
    p.mortality = baseline;
    p.mortality.mu_d = std::exp(logs(StateLayout::mu_d));
    p.influx.r1 = std::exp(logs(StateLayout::r1));
    p.influx.r2 = std::exp(logs(StateLayout::r2));
    p.influx.alpha1 = std::exp(logs(StateLayout::alpha1));
    p.influx.beta1 = std::exp(logs(StateLayout::beta1));
    p.influx.alpha2 = std::exp(logs(StateLayout::alpha2));
    p.influx.beta2 = std::exp(logs(StateLayout::beta2));
    return p;
}

void FilterConfig::validate() const {
    grid.validate();
    if (ensemble_size < 2) {
        throw ConfigError("ensemble size must be at least 2");
    }
    if (!(dt > 0.0) || dt > 1.0) {
        throw ConfigError("time step must lie in (0, 1]");
    }
    if (!(quadrature_step > 0.0)) {
        throw ConfigError("quadrature step must be positive");
    }
    if (p0_state < 0.0 || p0_param < p0_state || q_scale < 0.0 || !(r_diag > 0.0)) {
        throw ConfigError("noise settings must satisfy p0_param >= p0_state >= 0, q >= 0, r > 0");
    }
    if (warmup_cycles < 0) {
        throw ConfigError("warm-up cycles must be nonnegative");
    }
    if (!(window_hi > window_lo)) {
        throw ConfigError("measurement window must be nonempty");
    }
}

MeasurementOperator::MeasurementOperator(const AgeGrid &grid, AgeBinScheme scheme, double window_lo,
                                         double window_hi)
    : scheme_{std::move(scheme)},
      weights_{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(scheme_.size()), static_cast<Eigen::Index>(grid.n_a))},
      measured_(scheme_.size(), false) {
    grid.validate();
    for (std::size_t k = 0; k < scheme_.size(); ++k) {
        const double lo = scheme_.lo(k);
        const double hi = scheme_.hi(k);
        for (std::size_t j = 0; j < grid.n_a; ++j) {
            const double overlap = std::min(hi, grid.age(j) + grid.delta_a) - std::max(lo, grid.age(j));
            if (overlap > 0.0) {
                weights_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = overlap;
            }
        }
        if (weights_.row(static_cast<Eigen::Index>(k)).sum() <= 0.0) {
            throw ConfigError("observation bin [" + std::to_string(lo) + ", " + std::to_string(hi) +
                              ") contains no model age cells");
        }
        measured_[k] = lo >= window_lo && hi <= window_hi;
    }
}

Eigen::VectorXd initial_state(const AgeGrid &grid, const InitialCondition &initial, const ModelParams &params) {
    const StateLayout layout{grid.n_a};
    Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.size());
    const GammaProfile rho(initial);
    for (std::size_t j = 1; j < grid.n_a; ++j) {
        x(layout.density(j)) = rho.value(grid.age(j));
    }
    x.tail(StateLayout::n_params) = log_params(params);
    return x;
}

Ensemble init_ensemble(const FilterConfig &config, const Eigen::VectorXd &x0) {
    config.validate();
    const StateLayout layout{config.grid.n_a};
    if (x0.size() != layout.size()) {
        throw std::invalid_argument("initial state has the wrong length");
    }
    Eigen::MatrixXd p0 = Eigen::MatrixXd::Constant(layout.size(), layout.size(), config.p0_state);
    for (std::size_t k = 0; k < StateLayout::n_params; ++k) {
        p0(layout.param(k), layout.param(k)) = config.p0_param;
    }
    const GaussianNoise draw(p0);

    Ensemble ens{layout, {}, {}, {}, 0.0, 0.0, 0};
    const auto m = static_cast<Eigen::Index>(config.ensemble_size);
    ens.members = x0.replicate(1, m);
    ens.exposure = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(layout.n_a), m);
    for (Eigen::Index i = 0; i < m; ++i) {
        CounterRng rng(config.seed, static_cast<std::uint64_t>(i), 0, init_stream);
        draw.add_sample(rng, ens.members.col(i));
        clamp_member(ens.members.col(i), layout);
        ens.anchors.push_back(density_of(ens.members, layout, i));
    }
    return ens;
}

StepReport forecast_step(Ensemble &ens, const FilterConfig &config, const GaussianNoise &process_noise,
                         const MortalityParams &baseline, const PopulationSurface &population,
                         double calendar_origin) {
    const auto &layout = ens.layout;
    const auto m = ens.members.cols();
    const SolverOptions options{calendar_origin, config.quadrature_step};
    const double dt = config.dt;
    std::vector<char> failed(static_cast<std::size_t>(m), 0);

    parallel_for(static_cast<std::size_t>(m), [&](std::size_t member) {
        const auto i = static_cast<Eigen::Index>(member);
        auto x = ens.members.col(i);
        bool ok = true;
        try {
            const Hazard hazard(model_params(x.tail(StateLayout::n_params), baseline));
            const GridProfile anchor(config.grid, ens.anchors[member]);
            for (std::size_t j = 0; j < layout.n_a; ++j) {
                ens.exposure(static_cast<Eigen::Index>(j), i) += x(layout.density(j)) * dt;
            }
            ok = euler_step(std::span<double>(x.data(), layout.n_a),
                            std::span<double>(x.data() + layout.n_a, layout.n_a), anchor, config.grid, hazard,
                            population, ens.window_start, ens.time, dt, options, config.attribution);
        } catch (const InterfaceError &) {
            throw;
        } catch (const std::exception &) {
            ok = false;
        }
        CounterRng rng(config.seed, member, ens.step + 1, process_stream);
        process_noise.add_sample(rng, x);
        if (!ok || !x.allFinite()) {
            failed[member] = 1;
            return;
        }
        clamp_member(x, layout);
    });

    StepReport report;
    report.resampled = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
    if (report.resampled > 0) {
        if (report.resampled == static_cast<std::size_t>(m)) {
            throw NumericalError("every ensemble member produced a non-finite forecast");
        }
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(layout.size());
        Eigen::VectorXd exposure = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.n_a));
        std::vector<double> anchor(layout.n_a, 0.0);
        double healthy = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!failed[static_cast<std::size_t>(i)]) {
                mean += ens.members.col(i);
                exposure += ens.exposure.col(i);
                for (std::size_t j = 0; j < layout.n_a; ++j) {
                    anchor[j] += ens.anchors[static_cast<std::size_t>(i)][j];
                }
                healthy += 1.0;
            }
        }
        mean /= healthy;
        exposure /= healthy;
        for (auto &v : anchor) {
            v /= healthy;
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            if (failed[static_cast<std::size_t>(i)]) {
                CounterRng rng(config.seed, static_cast<std::uint64_t>(i), ens.step + 1, resample_stream);
                ens.members.col(i) = mean;
                process_noise.add_sample(rng, ens.members.col(i));
                clamp_member(ens.members.col(i), layout);
                ens.exposure.col(i) = exposure;
                ens.anchors[static_cast<std::size_t>(i)] = anchor;
            }
        }
    }
    ens.step += 1;
    ens.time += dt;
    return report;
}

Eigen::MatrixXd measure(const Ensemble &ens, const MeasurementOperator &op) {
    const auto n_a = static_cast<Eigen::Index>(ens.layout.n_a);
    if (op.weights().cols() != n_a) {
        throw std::invalid_argument("measurement operator does not match the state grid");
    }
    return op.weights() * ens.members.middleRows(n_a, n_a);
}

Eigen::VectorXd reanchored_log_mu_d(double observed_deaths, double noise_variance, double mean_exposure,
                                    std::size_t members, std::uint64_t seed, std::uint64_t counter) {
    if (!(mean_exposure > 0.0)) {
        throw std::domain_error("re-anchoring needs positive exposure");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(members));
    const double sd = std::sqrt(std::max(noise_variance, 0.0));
    for (std::size_t i = 0; i < members; ++i) {
        CounterRng rng(seed, i, counter, reanchor_stream);
        std::normal_distribution<double> normal;
        const double deaths = std::max(1.0, observed_deaths + sd * normal(rng));
        out(static_cast<Eigen::Index>(i)) = std::log(deaths / mean_exposure);
    }
    return out;
}

UpdateReport update_step(Ensemble &ens, const ObservationYear &observation, const MeasurementOperator &op,
                         const FilterConfig &config) {
    const auto &layout = ens.layout;
    const auto m = ens.members.cols();
    const auto bins = op.scheme().size();
    if (observation.deaths.size() != bins) {
        throw std::invalid_argument("observation does not match the bin scheme");
    }
    std::vector<Eigen::Index> selected;
    for (std::size_t k = 0; k < bins; ++k) {
        if (op.measured()[k] && observation.deaths[k]) {
            selected.push_back(static_cast<Eigen::Index>(k));
        }
    }
    UpdateReport report;
    report.observed_bins = selected.size();
    if (selected.empty()) {
        return report;
    }
    const auto p = static_cast<Eigen::Index>(selected.size());
    double observed_total = 0.0;
    Eigen::VectorXd z(p);
    for (Eigen::Index s = 0; s < p; ++s) {
        const double deaths = *observation.deaths[static_cast<std::size_t>(selected[s])];
        z(s) = deaths / 1000.0;
        observed_total += deaths;
    }

    // Re-anchor log μ_d first and rescale each member's D̃ to the new rate, so
    // the gain works on the age profile rather than the overall level.
    const auto mu_row = layout.param(StateLayout::mu_d);
    std::optional<Eigen::VectorXd> anchored;
    if (config.reanchor_mu_d) {
        Eigen::VectorXd node_weight = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.n_a));
        for (auto k : selected) {
            node_weight += op.weights().row(k).transpose();
        }
        const double exposure = node_weight.dot(ensemble_mean(ens.exposure));
        if (exposure > 0.0) {
            const double variance = config.r_diag * static_cast<double>(p) * 1e6;
            anchored = reanchored_log_mu_d(observed_total, variance, exposure, static_cast<std::size_t>(m),
                                           config.seed, ens.step);
            const auto n_a = static_cast<Eigen::Index>(layout.n_a);
            for (Eigen::Index i = 0; i < m; ++i) {
                if (config.attribution == DeathAttribution::drug) {
                    ens.members.col(i).segment(n_a, n_a) *= std::exp((*anchored)(i) - ens.members(mu_row, i));
                }
                ens.members(mu_row, i) = (*anchored)(i);
            }
            report.reanchored = true;
        }
    }

    const Eigen::MatrixXd z_all = measure(ens, op);
    Eigen::MatrixXd z_members(p, m);
    Eigen::MatrixXd eta(p, m);
    const double sd = std::sqrt(config.r_diag);
    for (Eigen::Index i = 0; i < m; ++i) {
        CounterRng rng(config.seed, static_cast<std::uint64_t>(i), ens.step, observation_stream);
        std::normal_distribution<double> normal;
        Eigen::VectorXd draw(static_cast<Eigen::Index>(bins));
        for (auto &v : draw) {
            v = sd * normal(rng);
        }
        for (Eigen::Index s = 0; s < p; ++s) {
            z_members(s, i) = z_all(selected[s], i);
            eta(s, i) = draw(selected[s]);
        }
    }
    const Eigen::MatrixXd r = config.r_diag * Eigen::MatrixXd::Identity(p, p);
    const auto diag = perturbed_observation_update(ens.members, z_members, z, r, eta);
    report.pseudo_inverse = diag.pseudo_inverse;
    if (anchored) {
        ens.members.row(mu_row) = anchored->transpose();
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        clamp_member(ens.members.col(i), layout);
    }
    return report;
}

void annual_measurement_reset(Ensemble &ens) {
    const auto n_a = static_cast<Eigen::Index>(ens.layout.n_a);
    ens.members.middleRows(n_a, n_a).setZero();
    ens.exposure.setZero();
    for (Eigen::Index i = 0; i < ens.members.cols(); ++i) {
        ens.anchors[static_cast<std::size_t>(i)] = density_of(ens.members, ens.layout, i);
    }
    ens.window_start = ens.time;
}

std::pair<double, double> parameter_summary(const Ensemble &ens, StateLayout::Param p) {
    const Eigen::ArrayXd values = ens.members.row(ens.layout.param(p)).array().exp();
    const double mean = values.mean();
    const double m = static_cast<double>(values.size());
    const double var = m > 1 ? (values - mean).square().sum() / (m - 1.0) : 0.0;
    return {mean, std::sqrt(var)};
}

std::pair<double, double> mode_summary(const Ensemble &ens, StateLayout::Param alpha, StateLayout::Param beta) {
    const Eigen::ArrayXd a = ens.members.row(ens.layout.param(alpha)).array().exp();
    const Eigen::ArrayXd b = ens.members.row(ens.layout.param(beta)).array().exp();
    const double ma = a.mean();
    const double mb = b.mean();
    const double mode = (ma - 1.0) / mb;
    const double m = static_cast<double>(a.size());
    if (m < 2) {
        return {mode, 0.0};
    }
    // delta method on (α - 1) / β around the ensemble means
    const double vaa = (a - ma).square().sum() / (m - 1.0);
    const double vbb = (b - mb).square().sum() / (m - 1.0);
    const double vab = ((a - ma) * (b - mb)).sum() / (m - 1.0);
    const double ga = 1.0 / mb;
    const double gb = -mode / mb;
    return {mode, std::sqrt(std::max(0.0, ga * ga * vaa + gb * gb * vbb + 2.0 * ga * gb * vab))};
}

AssimilationResult run_assimilation(const ObservationSeries *observations, const FilterConfig &config,
                                    const AssimilationSetup &setup, const PopulationSurface &population) {
    config.validate();
    if (setup.horizon < setup.first_year) {
        throw ConfigError("horizon precedes the first year");
    }
    if (observations && observations->years.empty()) {
        observations = nullptr;
    }
    const auto &grid = config.grid;
    const MeasurementOperator op(grid, observations ? observations->scheme : setup.display_scheme,
                                 config.window_lo, config.window_hi);
    const MeasurementOperator display(grid, setup.display_scheme, 0.0, grid.last_age() + grid.delta_a);
    const StateLayout layout{grid.n_a};
    const GaussianNoise process_noise(
        Eigen::MatrixXd::Constant(layout.size(), layout.size(), config.q_scale));
    const auto steps = std::max<long>(1, std::lround(1.0 / config.dt));
    const double origin = setup.first_year;
    if (population.max_time() < origin + (setup.horizon - setup.first_year + 1) - 1e-9 ||
        population.first_time() > origin + 1e-9) {
        throw ConfigError("population data covers [" + std::to_string(population.first_time()) + ", " +
                          std::to_string(population.max_time()) + "], run needs [" +
                          std::to_string(setup.first_year) + ", " + std::to_string(setup.horizon + 1) + "]");
    }

    FilterConfig step_config = config;
    step_config.dt = 1.0 / static_cast<double>(steps);

    const Eigen::VectorXd x0 = initial_state(grid, setup.initial, setup.params);
    Ensemble ens = init_ensemble(config, x0);
    AssimilationResult result;

    auto run_year = [&](int year_index) {
        std::size_t resampled = 0;
        for (long k = 0; k < steps; ++k) {
            resampled += forecast_step(ens, step_config, process_noise, setup.baseline, population, origin).resampled;
        }
        ens.time = year_index + 1;
        result.resampled += resampled;
        return resampled;
    };
    auto report_update = [&](int year, const UpdateReport &u) {
        if (u.pseudo_inverse) {
            result.warnings.push_back("year " + std::to_string(year) +
                                      ": innovation covariance singular, pseudo-inverse used");
        }
    };

    const ObservationYear *first_obs = observations ? observations->find(setup.first_year) : nullptr;
    for (int cycle = 0; cycle < config.warmup_cycles && first_obs; ++cycle) {
        run_year(0);
        report_update(setup.first_year, update_step(ens, *first_obs, op, config));
        const auto n_a = static_cast<Eigen::Index>(layout.n_a);
        for (Eigen::Index i = 0; i < ens.members.cols(); ++i) {
            ens.members.col(i).head(n_a) = x0.head(n_a);
        }
        ens.time = 0.0;
        annual_measurement_reset(ens);
    }

    const int last_observed = observations ? observations->last_year() : setup.first_year - 1;
    for (int year = setup.first_year; year <= setup.horizon; ++year) {
        YearRecord rec;
        rec.year = year;
        rec.resampled = run_year(year - setup.first_year);
        rec.predicted = summarize(measure(ens, op));
        rec.display = summarize(measure(ens, display));
        rec.forecast_only = year > last_observed;
        const ObservationYear *obs = observations ? observations->find(year) : nullptr;
        if (obs) {
            rec.observed = obs->deaths;
        }
        if (obs && !rec.forecast_only) {
            const auto u = update_step(ens, *obs, op, config);
            report_update(year, u);
            rec.updated = u.observed_bins > 0;
        }
        std::tie(rec.mu_d, rec.sigma_mu_d) = parameter_summary(ens, StateLayout::mu_d);
        std::tie(rec.r1, rec.sigma_r1) = parameter_summary(ens, StateLayout::r1);
        std::tie(rec.r2, rec.sigma_r2) = parameter_summary(ens, StateLayout::r2);
        std::tie(rec.a1max, rec.sigma_a1max) = mode_summary(ens, StateLayout::alpha1, StateLayout::beta1);
        std::tie(rec.a2max, rec.sigma_a2max) = mode_summary(ens, StateLayout::alpha2, StateLayout::beta2);
        rec.mean = ensemble_mean(ens.members);
        rec.variance = (ens.members.colwise() - rec.mean).array().square().rowwise().sum() /
                       static_cast<double>(ens.members.cols() - 1);
        result.years.push_back(std::move(rec));
        annual_measurement_reset(ens);
    }
    if (result.resampled > 0) {
        result.warnings.push_back(std::to_string(result.resampled) +
                                  " member steps were non-finite and redrawn from the ensemble mean");
    }
    return result;
}

} // namespace odassim
