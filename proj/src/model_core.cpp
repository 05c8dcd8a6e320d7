#include "odassim/model_core.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace odassim {

namespace {

// Composite trapezoid over [0, length] with the largest step <= max_step.
template <typename Integrand> double trapezoid(double length, double max_step, Integrand &&g) {
    if (length <= 0.0) {
        return 0.0;
    }
    const auto n = std::max<long>(1, static_cast<long>(std::ceil(length / max_step - 1e-9)));
    const double h = length / static_cast<double>(n);
    double sum = 0.5 * (g(0.0) + g(length));
    for (long m = 1; m < n; ++m) {
        sum += g(static_cast<double>(m) * h);
    }
    return sum * h;
}

void require_nonnegative_age(double a) {
    if (!(a >= 0.0)) {
        throw std::domain_error("age must be nonnegative");
    }
}

} // namespace

std::vector<double> AgeGrid::ages() const {
    std::vector<double> out(n_a);
    for (std::size_t j = 0; j < n_a; ++j) {
        out[j] = age(j);
    }
    return out;
}

void AgeGrid::validate() const {
    if (!(delta_a > 0.0) || n_a < 2 || !(a0 >= 0.0)) {
        throw std::domain_error("age grid requires delta_a > 0, n_a >= 2 and a0 >= 0");
    }
}

AgeGrid AgeGrid::spanning(double a0, double a_max, double delta_a) {
    const double cells = (a_max - a0) / delta_a;
    const double rounded = std::round(cells);
    if (!(delta_a > 0.0) || rounded < 1.0 || std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells)) {
        throw std::domain_error("age range must be a positive multiple of delta_a");
    }
    AgeGrid grid{a0, delta_a, static_cast<std::size_t>(rounded) + 1};
    grid.validate();
    return grid;
}

void MortalityParams::validate() const {
    if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0) || !(mu_d >= 0.0) || !(lambda1 > 0.0) || !(lambda2 > 0.0) ||
        !(m_shift > 0.0)) {
        throw std::domain_error("mortality parameters out of range");
    }
}

double baseline_mortality(double a, const MortalityParams &p) {
    require_nonnegative_age(a);
    return p.gamma1 * std::exp(-p.lambda1 * a) + p.gamma2 + p.lambda2 * std::exp(p.lambda2 * (a - p.m_shift));
}

double total_mortality(double a, const MortalityParams &p) { return baseline_mortality(a, p) + p.mu_d; }

double baseline_mortality_integral(double lo, double hi, const MortalityParams &p) {
    require_nonnegative_age(lo);
    return p.gamma1 / p.lambda1 * (std::exp(-p.lambda1 * lo) - std::exp(-p.lambda1 * hi)) +
           p.gamma2 * (hi - lo) + std::exp(p.lambda2 * (hi - p.m_shift)) -
           std::exp(p.lambda2 * (lo - p.m_shift));
}

void InfluxParams::validate() const {
    if (!(r1 >= 0.0) || !(r2 >= 0.0) || !(alpha1 > 0.0) || !(beta1 > 0.0) || !(alpha2 > 0.0) ||
        !(beta2 > 0.0)) {
        throw std::domain_error("influx parameters out of range");
    }
}

double influx_rate(double a, const InfluxParams &q) {
    require_nonnegative_age(a);
    q.validate();
    double r = 0.0;
    if (q.r1 != 0.0) {
        r += q.r1 * gamma_pdf(a, q.alpha1, q.beta1);
    }
    if (q.r2 != 0.0) {
        r += q.r2 * gamma_pdf(a, q.alpha2, q.beta2);
    }
    return 0.5 * r;
}

double influx_rate_derivative(double a, const InfluxParams &q) {
    require_nonnegative_age(a);
    q.validate();
    double d = 0.0;
    if (q.r1 != 0.0) {
        d += q.r1 * GammaDensity(q.alpha1, q.beta1).pdf_derivative(a);
    }
    if (q.r2 != 0.0) {
        d += q.r2 * GammaDensity(q.alpha2, q.beta2).pdf_derivative(a);
    }
    return 0.5 * d;
}

double influx_rate_integral(double lo, double hi, const InfluxParams &q) {
    q.validate();
    double total = 0.0;
    if (q.r1 != 0.0) {
        total += q.r1 * influx_integral(lo, hi, 0.0, q.alpha1, q.beta1);
    }
    if (q.r2 != 0.0) {
        total += q.r2 * influx_integral(lo, hi, 0.0, q.alpha2, q.beta2);
    }
    return 0.5 * total;
}

void InitialCondition::validate() const {
    if (!(n0_total > 0.0) || !(prevalence >= 0.0) || !(prevalence < 1.0) || !(alpha0 > 0.0) ||
        !(beta0 > 0.0)) {
        throw std::domain_error("initial condition out of range");
    }
}

double initial_density(double a, const InitialCondition &ic) {
    require_nonnegative_age(a);
    return GammaProfile(ic).value(a);
}

double initial_density_derivative(double a, const InitialCondition &ic) {
    require_nonnegative_age(a);
    return GammaProfile(ic).derivative(a);
}

Hazard::Hazard(const ModelParams &params)
    : params_{params}, first_{params.influx.alpha1, params.influx.beta1},
      second_{params.influx.alpha2, params.influx.beta2} {
    params_.mortality.validate();
    params_.influx.validate();
}

double Hazard::influx(double a) const {
    const auto &q = params_.influx;
    double r = 0.0;
    if (q.r1 != 0.0) {
        r += q.r1 * first_.pdf(a);
    }
    if (q.r2 != 0.0) {
        r += q.r2 * second_.pdf(a);
    }
    return 0.5 * r;
}

double Hazard::influx_derivative(double a) const {
    const auto &q = params_.influx;
    double d = 0.0;
    if (q.r1 != 0.0) {
        d += q.r1 * first_.pdf_derivative(a);
    }
    if (q.r2 != 0.0) {
        d += q.r2 * second_.pdf_derivative(a);
    }
    return 0.5 * d;
}

double Hazard::primitive(double a) const {
    const auto &m = params_.mortality;
    const auto &q = params_.influx;
    double value = m.gamma1 / m.lambda1 * (1.0 - std::exp(-m.lambda1 * a)) + (m.gamma2 + m.mu_d) * a +
                   std::exp(m.lambda2 * (a - m.m_shift)) - std::exp(-m.lambda2 * m.m_shift);
    double influx = 0.0;
    if (q.r1 != 0.0) {
        influx += q.r1 * first_.cdf(a);
    }
    if (q.r2 != 0.0) {
        influx += q.r2 * second_.cdf(a);
    }
    return value + 0.5 * influx;
}

double characteristic_solution(double a, double t, const AgeProfile &initial, const ModelParams &params,
                               const PopulationSurface &population, const SolverOptions &options) {
    if (!(a >= 0.0) || !(t >= 0.0)) {
        throw std::domain_error("characteristic solution needs a >= 0 and t >= 0");
    }
    if (t == 0.0) {
        return initial.value(a);
    }
    const Hazard hazard(params);
    const double phi_a = hazard.primitive(a);
    const double origin = options.calendar_origin;

    if (a >= t) {
        const double u0 = a - t;
        const double transported = initial.value(u0) * std::exp(-(phi_a - hazard.primitive(u0)));
        const double recruited = trapezoid(t, options.quadrature_step, [&](double s) {
            const double u = u0 + s;
            return hazard.influx(u) * population.eval(u, origin + s) * std::exp(-(phi_a - hazard.primitive(u)));
        });
        return transported + recruited;
    }
    return trapezoid(a, options.quadrature_step, [&](double s) {
        return hazard.influx(s) * population.eval(s, origin + s - a + t) * std::exp(-(phi_a - hazard.primitive(s)));
    });
}

double density_rate(double a, double tau, const AgeProfile &initial, const Hazard &hazard,
                    const PopulationSurface &population, double window_start, const SolverOptions &options) {
    if (a <= 0.0) {
        return 0.0;
    }
    const double origin = options.calendar_origin + window_start;
    if (tau <= 0.0) {
        return -(initial.derivative(a) + initial.value(a) * hazard.rate(a)) +
               hazard.influx(a) * population.eval(a, origin);
    }

    const double phi_a = hazard.primitive(a);
    if (a >= tau) {
        const double u0 = a - tau;
        const double survival = std::exp(-(phi_a - hazard.primitive(u0)));
        const double transported = -(initial.derivative(u0) + initial.value(u0) * hazard.rate(u0)) * survival;
        const double recruited_now = hazard.influx(a) * population.eval(a, origin + tau);
        const double correction = trapezoid(tau, options.quadrature_step, [&](double s) {
            const double u = u0 + s;
            const auto n = population.sample(u, origin + s);
            const double r = hazard.influx(u);
            const double weight = std::exp(-(phi_a - hazard.primitive(u)));
            return weight * (n.value * (hazard.influx_derivative(u) + r * hazard.rate(u)) + n.d_age * r);
        });
        return transported + recruited_now - correction;
    }
    return trapezoid(a, options.quadrature_step, [&](double s) {
        return hazard.influx(s) * population.eval_dt(s, origin + s - a + tau) *
               std::exp(-(phi_a - hazard.primitive(s)));
    });
}

std::vector<double> state_derivative(const DensityField &state, double t, const ModelParams &params,
                                     const PopulationSurface &population, const SolverOptions &options) {
    if (t < state.time) {
        throw std::domain_error("state derivative requested before the state's time");
    }
    const GridProfile anchor(state.grid, state.values);
    const Hazard hazard(params);
    std::vector<double> rates(state.grid.n_a);
    for (std::size_t j = 0; j < state.grid.n_a; ++j) {
        rates[j] = density_rate(state.grid.age(j), t - state.time, anchor, hazard, population, state.time, options);
    }
    return rates;
}

std::vector<double> state_derivative(const AgeProfile &initial, const AgeGrid &grid, double t,
                                     const ModelParams &params, const PopulationSurface &population,
                                     const SolverOptions &options) {
    grid.validate();
    const Hazard hazard(params);
    std::vector<double> rates(grid.n_a);
    for (std::size_t j = 0; j < grid.n_a; ++j) {
        rates[j] = density_rate(grid.age(j), t, initial, hazard, population, 0.0, options);
    }
    return rates;
}

double death_rate(double a, const MortalityParams &p, DeathAttribution attribution) {
    return attribution == DeathAttribution::drug ? p.mu_d : total_mortality(a, p);
}

std::vector<double> accumulate_deaths(const DensityField &state, const MortalityParams &params, double t_a,
                                      double t_b, double step, DeathAttribution attribution) {
    const auto values = state.values;
    return accumulate_deaths([&values](double) { return values; }, state.grid, params, t_a, t_b, step,
                             attribution);
}

std::vector<double> accumulate_deaths(const std::function<std::vector<double>(double)> &density_at,
                                      const AgeGrid &grid, const MortalityParams &params, double t_a,
                                      double t_b, double step, DeathAttribution attribution) {
    if (t_b < t_a) {
        throw std::domain_error("death accumulation window must satisfy t_a <= t_b");
    }
    std::vector<double> deaths(grid.n_a, 0.0);
    const double length = t_b - t_a;
    if (length == 0.0) {
        return deaths;
    }
    const auto n = std::max<long>(1, static_cast<long>(std::ceil(length / step - 1e-9)));
    const double h = length / static_cast<double>(n);
    std::vector<double> rates(grid.n_a);
    for (std::size_t j = 0; j < grid.n_a; ++j) {
        rates[j] = death_rate(grid.age(j), params, attribution);
    }
    for (long k = 0; k < n; ++k) {
        const auto density = density_at(t_a + static_cast<double>(k) * h);
        for (std::size_t j = 0; j < grid.n_a; ++j) {
            deaths[j] += rates[j] * density[j] * h / 1000.0;
        }
    }
    return deaths;
}

bool euler_step(std::span<double> density, std::span<double> deaths, const AgeProfile &anchor,
                const AgeGrid &grid, const Hazard &hazard, const PopulationSurface &population,
                double window_start, double t, double dt, const SolverOptions &options,
                DeathAttribution attribution) {
    const double tau = t - window_start;
    std::vector<double> rates(grid.n_a);
    for (std::size_t j = 0; j < grid.n_a; ++j) {
        rates[j] = density_rate(grid.age(j), tau, anchor, hazard, population, window_start, options);
        if (!std::isfinite(rates[j])) {
            return false;
        }
    }
    const auto &mortality = hazard.params().mortality;
    for (std::size_t j = 0; j < grid.n_a; ++j) {
        deaths[j] += death_rate(grid.age(j), mortality, attribution) * density[j] * dt / 1000.0;
        density[j] += dt * rates[j];
    }
    return true;
}

std::vector<SimulatedYear> simulate(const SimulationSetup &setup, const PopulationSurface &population) {
    setup.grid.validate();
    const auto steps = std::max<long>(1, std::lround(1.0 / setup.dt));
    const double dt = 1.0 / static_cast<double>(steps);
    const SolverOptions options{static_cast<double>(setup.first_year), dt};
    const Hazard hazard(setup.params);

    std::vector<double> density(setup.grid.n_a);
    {
        const GammaProfile rho(setup.initial);
        for (std::size_t j = 0; j < setup.grid.n_a; ++j) {
            density[j] = rho.value(setup.grid.age(j));
        }
        density[0] = 0.0;
    }

    std::vector<SimulatedYear> out;
    for (int year = setup.first_year; year <= setup.last_year; ++year) {
        const double window_start = year - setup.first_year;
        const GridProfile anchor(setup.grid, density);
        std::vector<double> deaths(setup.grid.n_a, 0.0);
        for (long k = 0; k < steps; ++k) {
            const double t = window_start + static_cast<double>(k) * dt;
            if (!euler_step(density, deaths, anchor, setup.grid, hazard, population, window_start, t, dt, options,
                            setup.attribution)) {
                throw std::domain_error("non-finite density rate in forward simulation");
            }
            for (auto &v : density) {
                v = std::max(v, 0.0);
            }
        }
        SimulatedYear record{year, density, deaths};
        for (auto &d : record.annual_deaths) {
            d *= 1000.0 * setup.grid.delta_a;
        }
        out.push_back(std::move(record));
    }
    return out;
}

} // namespace odassim
