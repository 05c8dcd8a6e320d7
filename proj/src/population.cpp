#include "odassim/population.h"

#include "odassim/errors.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace odassim {

PopulationTable::Grid PopulationTable::to_grid() const {
    Grid grid;
    for (const auto &row : rows) {
        grid.ages.push_back(row.age);
        grid.years.push_back(row.year);
    }
    for (auto *axis : {&grid.ages, &grid.years}) {
        std::sort(axis->begin(), axis->end());
        axis->erase(std::unique(axis->begin(), axis->end()), axis->end());
    }
    grid.counts = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(grid.ages.size()),
                                            static_cast<Eigen::Index>(grid.years.size()),
                                            std::numeric_limits<double>::quiet_NaN());
    auto index_of = [](const std::vector<int> &axis, int value) {
        return static_cast<Eigen::Index>(std::lower_bound(axis.begin(), axis.end(), value) - axis.begin());
    };
    for (const auto &row : rows) {
        auto &cell = grid.counts(index_of(grid.ages, row.age), index_of(grid.years, row.year));
        if (!std::isnan(cell)) {
            throw IngestError("duplicate population cell (year " + std::to_string(row.year) + ", age " +
                              std::to_string(row.age) + ")");
        }
        cell = row.count;
    }

    std::ostringstream gaps;
    std::size_t missing = 0;
    for (Eigen::Index i = 0; i < grid.counts.rows(); ++i) {
        for (Eigen::Index j = 0; j < grid.counts.cols(); ++j) {
            if (std::isnan(grid.counts(i, j))) {
                if (missing < 10) {
                    gaps << (missing ? ", " : "") << "(year " << grid.years[j] << ", age " << grid.ages[i] << ")";
                }
                ++missing;
            }
        }
    }
    if (missing > 0) {
        throw IngestError("population table is not rectangular; " + std::to_string(missing) +
                          " missing cells: " + gaps.str() + (missing > 10 ? ", ..." : ""));
    }
    return grid;
}

double PopulationTable::total(int year) const {
    double sum = 0.0;
    for (const auto &row : rows) {
        if (row.year == year) {
            sum += row.count;
        }
    }
    return sum;
}

QuadraticSplineBasis::QuadraticSplineBasis(std::vector<double> sites) : sites_{std::move(sites)} {
    const auto n = sites_.size();
    if (n < 3) {
        throw std::domain_error("quadratic spline needs at least 3 sites");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(sites_[i] > sites_[i - 1])) {
            throw std::domain_error("spline sites must be strictly increasing");
        }
    }
    knots_.assign(3, sites_.front());
    for (std::size_t i = 1; i + 2 < n; ++i) {
        knots_.push_back(0.5 * (sites_[i] + sites_[i + 1]));
    }
    knots_.insert(knots_.end(), 3, sites_.back());
}

QuadraticSplineBasis::Local QuadraticSplineBasis::evaluate(double x) const {
    const auto n = sites_.size();
    // Span index i with knots_[i] <= x < knots_[i+1], restricted to 2..n-1.
    auto it = std::upper_bound(knots_.begin() + 3, knots_.begin() + static_cast<std::ptrdiff_t>(n), x);
    auto i = static_cast<std::size_t>(it - knots_.begin()) - 1;
    i = std::clamp<std::size_t>(i, 2, n - 1);

    const auto &t = knots_;
    const double width = t[i + 1] - t[i];
    const double n_lo = (t[i + 1] - x) / width; // N_{i-1,1}
    const double n_hi = (x - t[i]) / width;     // N_{i,1}
    const double span_lo = t[i + 1] - t[i - 1];
    const double span_hi = t[i + 2] - t[i];

    Local local{};
    local.first = i - 2;
    local.value[0] = (t[i + 1] - x) / span_lo * n_lo;
    local.value[1] = (x - t[i - 1]) / span_lo * n_lo + (t[i + 2] - x) / span_hi * n_hi;
    local.value[2] = (x - t[i]) / span_hi * n_hi;
    local.derivative[0] = -2.0 * n_lo / span_lo;
    local.derivative[1] = 2.0 * (n_lo / span_lo - n_hi / span_hi);
    local.derivative[2] = 2.0 * n_hi / span_hi;
    return local;
}

Eigen::MatrixXd QuadraticSplineBasis::collocation() const {
    const auto n = static_cast<Eigen::Index>(sites_.size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto local = evaluate(sites_[static_cast<std::size_t>(r)]);
        for (int k = 0; k < 3; ++k) {
            b(r, static_cast<Eigen::Index>(local.first) + k) = local.value[k];
        }
    }
    return b;
}

PopulationSurface::PopulationSurface(QuadraticSplineBasis age_basis, QuadraticSplineBasis time_basis,
                                     Eigen::MatrixXd coefficients, double max_age, double max_time)
    : age_basis_{std::move(age_basis)}, time_basis_{std::move(time_basis)},
      coefficients_{std::move(coefficients)}, max_age_{max_age}, max_time_{max_time} {}

bool PopulationSurface::covers(double a, double t) const noexcept {
    constexpr double slack = 1e-9;
    return a >= min_age() - slack && a <= max_age_ + slack && t >= first_time() - slack &&
           t <= max_time_ + slack;
}

void PopulationSurface::check_range(double a, double t) const {
    if (!covers(a, t)) {
        std::ostringstream msg;
        msg << "population surface queried at (age " << a << ", time " << t << ") outside [" << min_age()
            << ", " << max_age_ << "] x [" << first_time() << ", " << max_time_ << "]";
        throw InterfaceError(msg.str());
    }
}

PopulationSample PopulationSurface::raw(double a, double t) const {
    const bool held_age = a > last_knot_age();
    const auto ea = age_basis_.evaluate(std::min(a, last_knot_age()));
    auto at_time = [&](double time) {
        const auto et = time_basis_.evaluate(time);
        PopulationSample s{0.0, 0.0, 0.0};
        for (int p = 0; p < 3; ++p) {
            for (int q = 0; q < 3; ++q) {
                const double c = coefficients_(static_cast<Eigen::Index>(ea.first) + p,
                                               static_cast<Eigen::Index>(et.first) + q);
                s.value += ea.value[p] * et.value[q] * c;
                s.d_age += ea.derivative[p] * et.value[q] * c;
                s.d_time += ea.value[p] * et.derivative[q] * c;
            }
        }
        return s;
    };

    PopulationSample s;
    const double last = last_knot_time();
    if (t <= last) {
        s = at_time(std::max(t, first_time()));
    } else {
        const auto &years = time_basis_.sites();
        const double previous = years[years.size() - 2];
        const auto end = at_time(last);
        const auto before = at_time(previous);
        const double slope = (end.value - before.value) / (last - previous);
        const double slope_da = (end.d_age - before.d_age) / (last - previous);
        s.value = end.value + (t - last) * slope;
        s.d_age = end.d_age + (t - last) * slope_da;
        s.d_time = slope;
    }
    if (held_age) {
        s.d_age = 0.0;
    }
    if (s.value < 0.0) {
        return {0.0, 0.0, 0.0};
    }
    return s;
}

double PopulationSurface::eval(double a, double t) const { return sample(a, t).value; }
double PopulationSurface::eval_da(double a, double t) const { return sample(a, t).d_age; }
double PopulationSurface::eval_dt(double a, double t) const { return sample(a, t).d_time; }

PopulationSample PopulationSurface::sample(double a, double t) const {
    check_range(a, t);
    return raw(a, t);
}

std::string PopulationSurface::extrapolation_rule() {
    return "N(a,t) beyond the last table year: N(a,T) + (t-T)*(N(a,T)-N(a,T_prev)), clamped at 0; "
           "ages above the last table age hold N(a_last,t)";
}

PopulationSurface fit_surface(const PopulationTable &table, const SurfaceOptions &options) {
    const auto grid = table.to_grid();
    if (grid.ages.size() < 3 || grid.years.size() < 3) {
        throw std::domain_error("population surface needs at least 3 ages and 3 years");
    }
    std::vector<double> ages(grid.ages.begin(), grid.ages.end());
    std::vector<double> years(grid.years.begin(), grid.years.end());
    QuadraticSplineBasis age_basis(std::move(ages));
    QuadraticSplineBasis time_basis(std::move(years));

    const Eigen::MatrixXd along_age = age_basis.collocation().fullPivLu().solve(grid.counts);
    const Eigen::MatrixXd coefficients =
        time_basis.collocation().fullPivLu().solve(along_age.transpose()).transpose();

    const double max_age = std::max(options.max_age, age_basis.back());
    const double max_time = time_basis.back() + options.forecast_years + 1.0;
    return PopulationSurface(std::move(age_basis), std::move(time_basis), coefficients, max_age, max_time);
}

PopulationTable synthetic_population(int first_year, int last_year, double total_first_year,
                                     double annual_growth, int max_age) {
    std::vector<double> shape(static_cast<std::size_t>(max_age) + 1);
    for (int a = 0; a <= max_age; ++a) {
        const double x = a;
        double w = 1.0 + 0.25 * std::exp(-std::pow((x - 25.0) / 8.0, 2)) +
                   0.30 * std::exp(-std::pow((x - 50.0) / 10.0, 2));
        if (x > 60.0) {
            w *= std::exp(-std::pow((x - 60.0) / 15.0, 2));
        }
        shape[static_cast<std::size_t>(a)] = w;
    }
    double norm = 0.0;
    for (double w : shape) {
        norm += w;
    }

    PopulationTable table;
    for (int year = first_year; year <= last_year; ++year) {
        const double scale = total_first_year / norm * (1.0 + annual_growth * (year - first_year));
        for (int a = 0; a <= max_age; ++a) {
            // Younger cohorts grow slightly faster, so the age profile shifts over time.
            const double tilt = 1.0 + 0.002 * (year - first_year) * (40.0 - a) / 40.0;
            table.rows.push_back({year, a, std::round(scale * shape[static_cast<std::size_t>(a)] * tilt)});
        }
    }
    return table;
}

} // namespace odassim
