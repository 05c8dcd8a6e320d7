#include "odassim/twin.h"

#include <cmath>

namespace odassim {

TwinData generate_twin(const TwinSetup &setup, const PopulationSurface &population) {
    if (setup.last_year < setup.first_year) {
        throw std::domain_error("twin experiment needs last_year >= first_year");
    }
    const auto &grid = setup.grid;
    const MeasurementOperator op(grid, setup.scheme, 0.0, grid.last_age() + grid.delta_a);
    const auto steps = std::max<long>(1, std::lround(1.0 / setup.dt));
    const double dt = 1.0 / static_cast<double>(steps);
    const SolverOptions options{static_cast<double>(setup.first_year), dt};
    const double span = std::max(1, setup.last_year - setup.first_year);

    std::vector<double> density(grid.n_a, 0.0);
    const GammaProfile rho(setup.initial);
    for (std::size_t j = 1; j < grid.n_a; ++j) {
        density[j] = rho.value(grid.age(j));
    }

    TwinData out{ObservationSeries{setup.scheme, {}, {}, {}, {}}, {}};
    const double sd = std::sqrt(setup.r_diag) * 1000.0;
    for (int year = setup.first_year; year <= setup.last_year; ++year) {
        const double f = (year - setup.first_year) / span;
        ModelParams p = setup.truth;
        p.mortality.mu_d = setup.mu_d_start + f * (setup.mu_d_end - setup.mu_d_start);
        const double a1max = setup.a1max_start + f * (setup.a1max_end - setup.a1max_start);
        p.influx.alpha1 = 1.0 + a1max * p.influx.beta1;
        out.truth.years.push_back(year);
        out.truth.mu_d.push_back(p.mortality.mu_d);
        out.truth.a1max.push_back(a1max);

        const Hazard hazard(p);
        const double window_start = year - setup.first_year;
        const GridProfile anchor(grid, density);
        std::vector<double> deaths(grid.n_a, 0.0);
        for (long k = 0; k < steps; ++k) {
            euler_step(density, deaths, anchor, grid, hazard, population, window_start,
                       window_start + static_cast<double>(k) * dt, dt, options, DeathAttribution::drug);
            for (auto &v : density) {
                v = std::max(v, 0.0);
            }
            density[0] = 0.0;
        }

        out.truth.density.push_back(density);
        const Eigen::VectorXd bins =
            op.apply(Eigen::Map<const Eigen::VectorXd>(deaths.data(), static_cast<Eigen::Index>(deaths.size())));
        ObservationYear obs{year, {}, {}};
        for (Eigen::Index k = 0; k < bins.size(); ++k) {
            CounterRng rng(setup.seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(year), 99);
            std::normal_distribution<double> normal;
            const double count = std::max(0.0, std::round(1000.0 * bins(k) + sd * normal(rng)));
            obs.deaths.emplace_back(count);
            obs.reliability.push_back(Reliability::ok);
            const auto kk = static_cast<std::size_t>(k);
            out.observations.records.push_back({year, setup.scheme.lo(kk), setup.scheme.hi(kk), count,
                                                Reliability::ok, std::to_string(year),
                                                std::to_string(static_cast<int>(setup.scheme.lo(kk))),
                                                std::to_string(static_cast<int>(setup.scheme.hi(kk))),
                                                std::to_string(static_cast<long long>(count)), "ok"});
        }
        out.observations.years.push_back(std::move(obs));
    }
    return out;
}

} // namespace odassim
