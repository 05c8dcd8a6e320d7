#include "odassim/errors.h"
#include "odassim/population.h"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace odassim;

namespace {

PopulationTable smooth_table() {
    // N(a, t) = 1e5 + 300 a - 2 a² + 50 (t - 2000) + 4 (t - 2000)²: quadratic in
    // both directions, so the quadratic spline reproduces it exactly
    PopulationTable t;
    for (int year = 2000; year <= 2010; ++year) {
        for (int age = 0; age <= 85; ++age) {
            const double dy = year - 2000;
            t.rows.push_back({year, age, 1e5 + 300.0 * age - 2.0 * age * age + 50.0 * dy + 4.0 * dy * dy});
        }
    }
    return t;
}

double exact(double a, double t) {
    const double dy = t - 2000.0;
    return 1e5 + 300.0 * a - 2.0 * a * a + 50.0 * dy + 4.0 * dy * dy;
}

} // namespace

TEST_CASE("table to grid") {
    const auto table = smooth_table();
    const auto g = table.to_grid();
    CHECK(g.ages.size() == 86);
    CHECK(g.years.size() == 11);
    CHECK(g.counts(10, 3) == doctest::Approx(exact(10, 2003)));
    CHECK(table.total(2000) > 0.0);

    auto dup = table;
    dup.rows.push_back(dup.rows.front());
    CHECK_THROWS_AS(dup.to_grid(), IngestError);
    auto gap = table;
    gap.rows.erase(gap.rows.begin() + 5);
    CHECK_THROWS_AS(gap.to_grid(), IngestError);
}

TEST_CASE("quadratic spline basis") {
    const QuadraticSplineBasis b({0.0, 1.0, 2.0, 3.0, 5.0});
    for (double x : {0.0, 0.3, 1.7, 2.5, 4.9}) {
        const auto e = b.evaluate(x);
        CHECK(e.value[0] + e.value[1] + e.value[2] == doctest::Approx(1.0));
        CHECK(e.derivative[0] + e.derivative[1] + e.derivative[2] == doctest::Approx(0.0).epsilon(1e-12));
    }
    const Eigen::MatrixXd c = b.collocation();
    CHECK(c.rows() == 5);
    CHECK(c.rowwise().sum().isApprox(Eigen::VectorXd::Ones(5)));
    CHECK_THROWS_AS(QuadraticSplineBasis({0.0, 1.0}), std::domain_error);
    CHECK_THROWS_AS(QuadraticSplineBasis({0.0, 2.0, 1.0}), std::domain_error);
}

TEST_CASE("surface interpolates the table and reproduces quadratics") {
    const auto s = fit_surface(smooth_table());
    for (int year : {2000, 2004, 2010}) {
        for (int age : {0, 17, 85}) {
            CHECK(s.eval(age, year) == doctest::Approx(exact(age, year)).epsilon(1e-10));
        }
    }
    CHECK(s.eval(33.3, 2006.4) == doctest::Approx(exact(33.3, 2006.4)).epsilon(1e-10));
}

TEST_CASE("partial derivatives against central differences") {
    const auto s = fit_surface(synthetic_population(1999, 2021));
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> age(1.0, 84.0), time(1999.5, 2020.5);
    for (int i = 0; i < 50; ++i) {
        const double a = age(rng), t = time(rng), h = 1e-4;
        const double fa = (s.eval(a + h, t) - s.eval(a - h, t)) / (2 * h);
        const double ft = (s.eval(a, t + h) - s.eval(a, t - h)) / (2 * h);
        const double floor = 1e-3 * s.eval(a, t);
        CHECK(std::abs(s.eval_da(a, t) - fa) <= 1e-3 * std::max(std::abs(fa), floor));
        CHECK(std::abs(s.eval_dt(a, t) - ft) <= 1e-3 * std::max(std::abs(ft), floor));
        const auto sample = s.sample(a, t);
        CHECK(sample.value == doctest::Approx(s.eval(a, t)));
    }
}

TEST_CASE("extrapolation rules") {
    const auto s = fit_surface(smooth_table());
    CHECK(s.last_knot_time() == 2010.0);
    CHECK(s.max_time() == 2014.0);
    // linear continuation from the last two table years
    const double slope = exact(40, 2010) - exact(40, 2009);
    CHECK(s.eval(40.0, 2012.5) == doctest::Approx(exact(40, 2010) + 2.5 * slope).epsilon(1e-10));
    CHECK(s.eval_dt(40.0, 2012.5) == doctest::Approx(slope).epsilon(1e-10));
    // ages past the last table age hold the last profile
    CHECK(s.eval(100.0, 2005.0) == doctest::Approx(exact(85, 2005)).epsilon(1e-10));
    CHECK(s.eval_da(100.0, 2005.0) == 0.0);
    CHECK(s.covers(120.0, 2014.0));
    CHECK_FALSE(s.covers(40.0, 2014.5));
    CHECK_THROWS_AS(s.eval(40.0, 2015.0), InterfaceError);
    CHECK_THROWS_AS(s.eval(40.0, 1999.0), InterfaceError);
    CHECK_THROWS_AS(s.eval(-1.0, 2005.0), InterfaceError);
    CHECK_FALSE(PopulationSurface::extrapolation_rule().empty());
}

TEST_CASE("extrapolation is clamped at zero") {
    PopulationTable t;
    for (int year = 2000; year <= 2002; ++year) {
        for (int age = 0; age <= 3; ++age) {
            t.rows.push_back({year, age, 1000.0 - 450.0 * (year - 2000)});
        }
    }
    const auto s = fit_surface(t);
    CHECK(s.eval(1.0, 2004.0) == 0.0);
}

TEST_CASE("synthetic population") {
    const auto t = synthetic_population(1999, 2001, 1e6, 0.01, 85);
    CHECK(t.rows.size() == 3 * 86);
    CHECK(t.total(1999) == doctest::Approx(1e6).epsilon(1e-3));
    CHECK(t.total(2000) > t.total(1999));
    CHECK_THROWS_AS(fit_surface(synthetic_population(1999, 2000)), std::domain_error);
}
