#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace odassim {

/// One (year, single-year age, persons) cell of a population export.
struct PopulationRow {
    int year;
    int age;
    double count;
};

/// Age-by-year population counts in file order.
struct PopulationTable {
    std::vector<PopulationRow> rows;

    /// Rectangular view: sorted distinct ages and years, counts(age_index, year_index).
    struct Grid {
        std::vector<int> ages;
        std::vector<int> years;
        Eigen::MatrixXd counts;
    };

    /// Throws IngestError listing duplicates or missing (age, year) cells.
    Grid to_grid() const;

    double total(int year) const;
};

/// Value and first partial derivatives of N(a, t).
struct PopulationSample {
    double value;
    double d_age;  ///< ∂N/∂a
    double d_time; ///< ∂N/∂t
};

/// Quadratic B-spline basis interpolating at a strictly increasing set of sites.
/// Interior knots sit midway between neighbouring sites.
class QuadraticSplineBasis {
  public:
    explicit QuadraticSplineBasis(std::vector<double> sites);

    std::size_t size() const noexcept { return sites_.size(); }
    const std::vector<double> &sites() const noexcept { return sites_; }
    double front() const noexcept { return sites_.front(); }
    double back() const noexcept { return sites_.back(); }

    /// Nonzero basis values and derivatives at x; indices first..first+2.
    struct Local {
        std::size_t first;
        double value[3];
        double derivative[3];
    };
    Local evaluate(double x) const;

    /// Collocation matrix B(i, k) = B_k(site_i).
    Eigen::MatrixXd collocation() const;

  private:
    std::vector<double> sites_;
    std::vector<double> knots_;
};

/// Tensor-product quadratic spline interpolant of N(a, t), with the
/// age and time extrapolation rules used for forecasting:
///  - ages above the last knot hold the last-knot age profile N(a_max, t);
///  - times after the last knot extend linearly using the last two knot
///    years, N(a, T) + (t - T)(N(a, T) - N(a, T - 1)), clamped at 0.
/// Table year Y is placed at calendar time Y.
class PopulationSurface {
  public:
    PopulationSurface(QuadraticSplineBasis age_basis, QuadraticSplineBasis time_basis,
                      Eigen::MatrixXd coefficients, double max_age, double max_time);

    double eval(double a, double t) const;
    double eval_da(double a, double t) const;
    double eval_dt(double a, double t) const;
    PopulationSample sample(double a, double t) const;

    double min_age() const noexcept { return age_basis_.front(); }
    double last_knot_age() const noexcept { return age_basis_.back(); }
    double max_age() const noexcept { return max_age_; }
    double first_time() const noexcept { return time_basis_.front(); }
    double last_knot_time() const noexcept { return time_basis_.back(); }
    double max_time() const noexcept { return max_time_; }

    bool covers(double a, double t) const noexcept;

    /// Human-readable statement of the extrapolation rule, recorded in run metadata.
    static std::string extrapolation_rule();

  private:
    PopulationSample raw(double a, double t) const;
    void check_range(double a, double t) const;

    QuadraticSplineBasis age_basis_;
    QuadraticSplineBasis time_basis_;
    Eigen::MatrixXd coefficients_;
    double max_age_;
    double max_time_;
};

struct SurfaceOptions {
    /// Oldest supported query age; older ages reuse the last-knot profile.
    double max_age = 130.0;
    /// Supported years past the last table year (queries run to the end of that year).
    int forecast_years = 3;
};

/// Interpolating fit; requires a rectangular table with at least 3 ages and 3 years.
PopulationSurface fit_surface(const PopulationTable &table, const SurfaceOptions &options = {});

/// Smooth synthetic age-by-year population resembling the national profile
/// (two broad peaks, slow linear growth). Used for twin experiments and demos.
PopulationTable synthetic_population(int first_year, int last_year, double total_first_year = 2.75e8,
                                     double annual_growth = 0.008, int max_age = 85);

} // namespace odassim
