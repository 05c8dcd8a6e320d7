#pragma once

#include "odassim/population.h"
#include "odassim/special_functions.h"

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace odassim {

/// Uniform age discretization; node j (0-based) sits at a0 + j·delta_a and
/// stands for the age cell [a_j, a_j + delta_a).
struct AgeGrid {
    double a0 = 0.0;
    double delta_a = 1.2;
    std::size_t n_a = 101;

    double age(std::size_t j) const noexcept { return a0 + static_cast<double>(j) * delta_a; }
    double last_age() const noexcept { return age(n_a - 1); }
    std::vector<double> ages() const;
    void validate() const;

    /// Grid from a0 to a_max inclusive; a_max - a0 must be a multiple of delta_a.
    static AgeGrid spanning(double a0, double a_max, double delta_a);
};

/// Gompertz–Makeham–Siler baseline plus a drug-caused excess rate. Defaults are
/// the 2010 US male constants.
struct MortalityParams {
    double gamma1 = 0.00258;
    double gamma2 = 0.00037;
    double lambda1 = 5.09657;
    double lambda2 = 0.09040;
    double m_shift = 83.22956;
    double mu_d = 0.0;

    /// gamma1, gamma2, mu_d >= 0 (zero switches a term off); lambda1, lambda2, m_shift > 0.
    void validate() const;
};

/// μ0(a) = γ1 e^{-λ1 a} + γ2 + λ2 e^{λ2 (a - M)}, excluding μ_d.
double baseline_mortality(double a, const MortalityParams &p);
/// μ0(a) + μ_d.
double total_mortality(double a, const MortalityParams &p);
/// ∫_lo^hi μ0(a) da in closed form.
double baseline_mortality_integral(double lo, double hi, const MortalityParams &p);

/// Two-component gamma mixture influx r(a) = [r1 f(a; α1, β1) + r2 f(a; α2, β2)] / 2.
struct InfluxParams {
    double r1 = 0.02;
    double alpha1 = 10.0;
    double beta1 = 1.0 / 3.0;
    double r2 = 0.02;
    double alpha2 = 15.0;
    double beta2 = 1.0 / 3.0;

    /// r1, r2 >= 0; shapes and rates > 0.
    void validate() const;
};

double influx_rate(double a, const InfluxParams &q);
/// d r / d a; singular at a = 0 when a shape is below 2.
double influx_rate_derivative(double a, const InfluxParams &q);
/// ∫_lo^hi r(a) da via the incomplete gamma identity.
double influx_rate_integral(double lo, double hi, const InfluxParams &q);

/// ρ(a) = prevalence · N0 · f(a; α0, β0).
struct InitialCondition {
    double n0_total = 274886150.0;
    double prevalence = 0.015;
    double alpha0 = 12.0;
    double beta0 = 1.0 / 3.0;

    void validate() const;
};

double initial_density(double a, const InitialCondition &ic);
double initial_density_derivative(double a, const InitialCondition &ic);

struct ModelParams {
    MortalityParams mortality;
    InfluxParams influx;
};

/// Density n(a_j) on a grid at one instant.
struct DensityField {
    AgeGrid grid;
    std::vector<double> values; ///< persons per year of age, one per node
    double time = 0.0;          ///< years since simulation start
};

/// An age profile n(·) with its first derivative; the "initial" density of a
/// characteristic solve.
class AgeProfile {
  public:
    virtual ~AgeProfile() = default;
    virtual double value(double a) const = 0;
    virtual double derivative(double a) const = 0;
};

/// The gamma-shaped initial condition.
class GammaProfile final : public AgeProfile {
  public:
    explicit GammaProfile(const InitialCondition &ic);
    double value(double a) const override;
    double derivative(double a) const override;

  private:
    double scale_;
    GammaDensity density_;
};

/// Shape-preserving (Fritsch–Carlson) cubic Hermite interpolant of grid values.
/// Nonnegative data stays nonnegative; constant beyond the grid ends.
class GridProfile final : public AgeProfile {
  public:
    GridProfile(const AgeGrid &grid, std::span<const double> values);
    double value(double a) const override;
    double derivative(double a) const override;

  private:
    AgeGrid grid_;
    std::vector<double> values_;
    std::vector<double> slopes_;
};

/// Total removal hazard h(a) = μ(a) + r(a) along a characteristic, with its
/// closed-form primitive. Mortality terms integrate analytically; the influx
/// terms use regularized incomplete gamma functions.
class Hazard {
  public:
    explicit Hazard(const ModelParams &params);

    double mortality(double a) const { return total_mortality(a, params_.mortality); }
    double influx(double a) const;
    double influx_derivative(double a) const;
    double rate(double a) const { return mortality(a) + influx(a); }
    /// Φ(a) = ∫_0^a h(u) du.
    double primitive(double a) const;
    /// ∫_lo^hi h(u) du.
    double integral(double lo, double hi) const { return primitive(hi) - primitive(lo); }

    const ModelParams &params() const noexcept { return params_; }

  private:
    ModelParams params_;
    GammaDensity first_;
    GammaDensity second_;
};

/// Maps local solve time onto the population surface clock and fixes the
/// outer quadrature resolution.
struct SolverOptions {
    /// Calendar time (population-surface time) of simulation time 0.
    double calendar_origin = 0.0;
    /// Largest composite-trapezoid step for the remaining ∫ ds integrals.
    double quadrature_step = 0.1;
};

/// Closed-form n(a, t) for the problem started at time 0 from `initial`.
/// a >= t follows the characteristic back to t = 0; a < t back to the a = 0 boundary.
double characteristic_solution(double a, double t, const AgeProfile &initial, const ModelParams &params,
                               const PopulationSurface &population, const SolverOptions &options = {});

/// ∂n/∂t at (a, tau) for the problem started at local time 0 from `initial`;
/// `window_start` is the simulation time of that origin. Node a = 0 carries the
/// boundary condition n(0, t) = 0 and returns 0.
double density_rate(double a, double tau, const AgeProfile &initial, const Hazard &hazard,
                    const PopulationSurface &population, double window_start, const SolverOptions &options);

/// ∂n/∂t at every node of `state.grid` at simulation time t >= state.time, with
/// `state` acting as the initial density of the characteristics (window origin
/// state.time).
std::vector<double> state_derivative(const DensityField &state, double t, const ModelParams &params,
                                     const PopulationSurface &population, const SolverOptions &options = {});

/// Same, for characteristics launched from an analytic profile at time 0.
std::vector<double> state_derivative(const AgeProfile &initial, const AgeGrid &grid, double t,
                                     const ModelParams &params, const PopulationSurface &population,
                                     const SolverOptions &options = {});

/// Which mortality counts toward accumulated deaths.
enum class DeathAttribution {
    drug,      ///< μ_d · n: overdose deaths only
    all_cause, ///< μ(a) · n: baseline plus drug-caused
};

double death_rate(double a, const MortalityParams &p, DeathAttribution attribution);

/// Per-node D̃ increment over [t_a, t_b] for a state held fixed, in deaths per
/// 1,000 (per year of age), by explicit Euler at `step`.
std::vector<double> accumulate_deaths(const DensityField &state, const MortalityParams &params, double t_a,
                                      double t_b, double step = 0.1,
                                      DeathAttribution attribution = DeathAttribution::all_cause);

/// Trajectory form: `density_at(t)` returns the node densities at time t.
std::vector<double> accumulate_deaths(const std::function<std::vector<double>(double)> &density_at,
                                      const AgeGrid &grid, const MortalityParams &params, double t_a,
                                      double t_b, double step = 0.1,
                                      DeathAttribution attribution = DeathAttribution::all_cause);

/// One explicit Euler step of the windowed dynamics: densities advance with
/// the closed-form ∂n/∂t of characteristics launched from `anchor` at
/// `window_start`; deaths (per 1,000) accumulate from the current densities.
/// Returns false if any rate is non-finite (state left untouched).
bool euler_step(std::span<double> density, std::span<double> deaths, const AgeProfile &anchor,
                const AgeGrid &grid, const Hazard &hazard, const PopulationSurface &population,
                double window_start, double t, double dt, const SolverOptions &options,
                DeathAttribution attribution);

/// Year-end output of a deterministic forward run.
struct SimulatedYear {
    int year;
    std::vector<double> density;       ///< n at the end of the year, per node
    std::vector<double> annual_deaths; ///< deaths in each node cell during the year (persons)
};

struct SimulationSetup {
    AgeGrid grid;
    ModelParams params;
    InitialCondition initial;
    int first_year = 1999;
    int last_year = 2024;
    double dt = 0.1;
    DeathAttribution attribution = DeathAttribution::drug;
};

/// Noise-free forward run; characteristic windows restart each calendar year.
std::vector<SimulatedYear> simulate(const SimulationSetup &setup, const PopulationSurface &population);

} // namespace odassim
