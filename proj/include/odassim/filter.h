#pragma once

#include "odassim/data_ingest.h"
#include "odassim/enkf.h"
#include "odassim/model_core.h"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace odassim {

/// Augmented state layout [n(a_1..a_Na), D̃(a_1..a_Na), log μ_d, log r1, log r2,
/// log α1, log β1, log α2, log β2].
struct StateLayout {
    std::size_t n_a;

    static constexpr std::size_t n_params = 7;
    enum Param : std::size_t { mu_d = 0, r1, r2, alpha1, beta1, alpha2, beta2 };

    Eigen::Index density(std::size_t j) const { return static_cast<Eigen::Index>(j); }
    Eigen::Index deaths(std::size_t j) const { return static_cast<Eigen::Index>(n_a + j); }
    Eigen::Index param(std::size_t k) const { return static_cast<Eigen::Index>(2 * n_a + k); }
    Eigen::Index size() const { return static_cast<Eigen::Index>(2 * n_a + n_params); }
};

/// Logs of (μ_d, r1, r2, α1, β1, α2, β2).
Eigen::VectorXd log_params(const ModelParams &p);
/// Inverse of log_params; baseline mortality constants come from `baseline`.
ModelParams model_params(const Eigen::Ref<const Eigen::VectorXd> &logs, const MortalityParams &baseline);

struct FilterConfig {
    std::size_t ensemble_size = 1000;
    double dt = 0.1;
    AgeGrid grid{};
    double quadrature_step = 0.1;
    /// P0 = p0_state·J with the log-parameter diagonal raised to p0_param.
    double p0_state = 1e-4;
    double p0_param = 1.0;
    /// Q = q_scale·J, applied at every Δt step.
    double q_scale = 1e-4;
    /// R = r_diag·I in (deaths per 1,000)².
    double r_diag = 2e-3;
    int warmup_cycles = 2;
    double window_lo = 10.0;
    double window_hi = 70.0;
    bool reanchor_mu_d = true;
    DeathAttribution attribution = DeathAttribution::drug;
    std::uint64_t seed = 20240101;

    void validate() const;
};

/// Maps per-node D̃ (per 1,000 per year of age) to per-bin deaths per 1,000 by
/// integrating over each bin: row k weights node j by the overlap of its cell
/// [a_j, a_j + Δa) with bin k. Bins not fully inside the measurement window
/// are masked.
class MeasurementOperator {
  public:
    MeasurementOperator(const AgeGrid &grid, AgeBinScheme scheme, double window_lo, double window_hi);

    const AgeBinScheme &scheme() const noexcept { return scheme_; }
    const Eigen::MatrixXd &weights() const noexcept { return weights_; }
    const std::vector<bool> &measured() const noexcept { return measured_; }

    /// All bins, masked or not.
    Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd> &deaths) const { return weights_ * deaths; }

  private:
    AgeBinScheme scheme_;
    Eigen::MatrixXd weights_;
    std::vector<bool> measured_;
};

struct Ensemble {
    StateLayout layout;
    Eigen::MatrixXd members;                  ///< one augmented state per column
    std::vector<std::vector<double>> anchors; ///< per member, n at window_start
    Eigen::MatrixXd exposure;                 ///< person-years per year of age accumulated this window, n_a × M
    double time = 0.0;                        ///< years since the run's first year began
    double window_start = 0.0;
    std::uint64_t step = 0; ///< noise counter

    std::size_t size() const { return static_cast<std::size_t>(members.cols()); }
};

/// M draws from N(x0, P0); densities and D̃ clamped at 0, anchors set to the
/// drawn densities.
Ensemble init_ensemble(const FilterConfig &config, const Eigen::VectorXd &x0);

/// Augmented initial state: n = ρ on the grid (0 at a = 0), D̃ = 0, log-parameters.
Eigen::VectorXd initial_state(const AgeGrid &grid, const InitialCondition &initial, const ModelParams &params);

struct StepReport {
    std::size_t resampled = 0; ///< members redrawn after a non-finite step
};

/// One Euler step Δt of every member plus N(0, Q) noise; parameters move only
/// through noise. `calendar_origin` is the calendar time of ens.time = 0.
StepReport forecast_step(Ensemble &ens, const FilterConfig &config, const GaussianNoise &process_noise,
                         const MortalityParams &baseline, const PopulationSurface &population,
                         double calendar_origin);

/// Predicted per-bin deaths per 1,000 for every member (bins × M).
Eigen::MatrixXd measure(const Ensemble &ens, const MeasurementOperator &op);

struct UpdateReport {
    std::size_t observed_bins = 0;
    bool pseudo_inverse = false;
    bool reanchored = false;
};

/// Perturbed-observation update with one year of counts (persons). Absent or
/// masked bins are dropped from h, R and the gain. With re-anchoring on, log μ_d
/// is first set from observed deaths over mean exposure and each member's D̃ is
/// rescaled to the new rate; the gain then acts on the remaining state and the
/// anchored log μ_d is restored. Densities and D̃ are clamped at 0 afterwards.
UpdateReport update_step(Ensemble &ens, const ObservationYear &observation, const MeasurementOperator &op,
                         const FilterConfig &config);

/// log μ_d for each member from observed deaths (persons) over the ensemble-mean
/// exposure (person-years) in the observed bins, with a per-member N(0, σ²)
/// draw added to the deaths and the result floored at 1 death.
Eigen::VectorXd reanchored_log_mu_d(double observed_deaths, double noise_variance, double mean_exposure,
                                    std::size_t members, std::uint64_t seed, std::uint64_t counter);

/// Zero D̃ and exposure, and restart characteristic windows from the current densities.
void annual_measurement_reset(Ensemble &ens);

/// Mean and standard deviation per bin in persons.
struct BinForecast {
    std::vector<double> mean;
    std::vector<double> sigma;
};

/// One calendar year of output.
struct YearRecord {
    int year;
    bool updated = false;
    bool forecast_only = false;
    std::size_t resampled = 0;
    /// Natural-scale parameter summaries after any update: μ_d, r1, r2, a1max, a2max.
    double mu_d = 0, sigma_mu_d = 0;
    double r1 = 0, sigma_r1 = 0;
    double r2 = 0, sigma_r2 = 0;
    double a1max = 0, sigma_a1max = 0;
    double a2max = 0, sigma_a2max = 0;
    BinForecast predicted; ///< prior annual deaths, observation scheme
    BinForecast display;   ///< prior annual deaths, display scheme
    std::vector<std::optional<double>> observed;
    Eigen::VectorXd mean;     ///< x̂ after any update
    Eigen::VectorXd variance; ///< diag(P) after any update
};

struct AssimilationSetup {
    ModelParams params;       ///< initial parameter guesses
    MortalityParams baseline; ///< fixed mortality constants (mu_d ignored)
    InitialCondition initial;
    int first_year = 1999;
    int horizon = 2024;
    AgeBinScheme display_scheme = AgeBinScheme::five_year();
};

struct AssimilationResult {
    std::vector<YearRecord> years;
    std::vector<std::string> warnings;
    std::size_t resampled = 0;
};

/// Full run: warm-up cycles on the first year, then yearly forecast/update
/// cycles through the last observed year and pure forecasts to the horizon.
/// Without observations every year is a forecast.
AssimilationResult run_assimilation(const ObservationSeries *observations, const FilterConfig &config,
                                    const AssimilationSetup &setup, const PopulationSurface &population);

/// Natural-scale mean and standard deviation of exp(log θ) across members.
std::pair<double, double> parameter_summary(const Ensemble &ens, StateLayout::Param p);
/// (α̂ - 1)/β̂ from the natural-scale ensemble means, with a delta-method standard deviation.
std::pair<double, double> mode_summary(const Ensemble &ens, StateLayout::Param alpha, StateLayout::Param beta);

} // namespace odassim
