#pragma once

#include "odassim/filter.h"

namespace odassim {

/// Synthetic truth for filter validation: a forward run whose μ_d and first
/// influx mode drift linearly between the first and last year, observed with
/// N(0, R) noise on the per-1,000 bin counts.
struct TwinSetup {
    ModelParams truth;   ///< parameters other than μ_d and α1
    InitialCondition initial;
    AgeGrid grid{};
    AgeBinScheme scheme = AgeBinScheme::nationwide();
    int first_year = 1999;
    int last_year = 2021;
    double mu_d_start = 0.002;
    double mu_d_end = 0.015;
    double a1max_start = 30.0;
    double a1max_end = 20.0;
    double dt = 0.1;
    double r_diag = 2e-3;
    std::uint64_t seed = 7;
};

struct TwinTruth {
    std::vector<int> years;
    std::vector<double> mu_d;
    std::vector<double> a1max;
    std::vector<std::vector<double>> density; ///< n on the grid at each year's end
};

struct TwinData {
    ObservationSeries observations;
    TwinTruth truth;
};

TwinData generate_twin(const TwinSetup &setup, const PopulationSurface &population);

} // namespace odassim
