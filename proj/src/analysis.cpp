#include "odassim/analysis.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace odassim {

double crude_rate(double deaths, double population) {
    if (!(population > 0.0)) {
        throw std::domain_error("crude rate needs a positive population");
    }
    return 1e5 * deaths / population;
}

CountyYearSlice build_slice(const CountyTable &table, int year, const SliceOptions &options) {
    CountyYearSlice slice{year, {}};
    for (const auto &r : table.records) {
        if (r.year != year || !r.deaths || !r.population) {
            continue;
        }
        if (options.strict && r.reliability != Reliability::ok) {
            continue;
        }
        if (*r.deaths < options.min_deaths || !(*r.population > 0.0)) {
            continue;
        }
        slice.counties.push_back(
            {r.county_id, r.county_name, *r.deaths, *r.population, crude_rate(*r.deaths, *r.population)});
    }
    return slice;
}

std::vector<int> county_years(const CountyTable &table) {
    std::set<int> years;
    for (const auto &r : table.records) {
        years.insert(r.year);
    }
    return {years.begin(), years.end()};
}

namespace {

void check_slice(const CountyYearSlice &slice) {
    if (slice.counties.empty()) {
        throw std::domain_error("Gini index of an empty slice");
    }
    for (const auto &c : slice.counties) {
        if (!(c.population > 0.0) || c.deaths < 0.0) {
            throw std::domain_error("Gini index needs positive populations and nonnegative deaths");
        }
    }
}

} // namespace

double gini_index(const CountyYearSlice &slice) {
    check_slice(slice);
    std::vector<const CountyEntry *> order;
    double total_pop = 0.0;
    double total_deaths = 0.0;
    for (const auto &c : slice.counties) {
        order.push_back(&c);
        total_pop += c.population;
        total_deaths += c.deaths;
    }
    if (total_deaths == 0.0) {
        return 0.0;
    }
    // Compare d_i/p_i < d_j/p_j by cross-multiplication so scaling is exact.
    std::sort(order.begin(), order.end(), [](const CountyEntry *a, const CountyEntry *b) {
        const double lhs = a->deaths * b->population;
        const double rhs = b->deaths * a->population;
        return lhs != rhs ? lhs < rhs : a->county_id < b->county_id;
    });
    double area = 0.0;
    double y = 0.0;
    for (const auto *c : order) {
        const double dx = c->population / total_pop;
        const double y_next = y + c->deaths / total_deaths;
        area += 0.5 * dx * (y + y_next);
        y = y_next;
    }
    return 1.0 - 2.0 * area;
}

double gini_pairwise(const CountyYearSlice &slice) {
    check_slice(slice);
    double total_pop = 0.0;
    double total_deaths = 0.0;
    for (const auto &c : slice.counties) {
        total_pop += c.population;
        total_deaths += c.deaths;
    }
    if (total_deaths == 0.0) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto &a : slice.counties) {
        for (const auto &b : slice.counties) {
            sum += a.population * b.population * std::abs(a.deaths / a.population - b.deaths / b.population);
        }
    }
    const double mean_rate = total_deaths / total_pop;
    return sum / (2.0 * total_pop * total_pop * mean_rate);
}

double mean_crude_rate(const CountyYearSlice &slice) {
    if (slice.counties.empty()) {
        throw std::domain_error("mean crude rate of an empty slice");
    }
    double sum = 0.0;
    for (const auto &c : slice.counties) {
        sum += c.crude_rate;
    }
    return sum / static_cast<double>(slice.counties.size());
}

std::vector<CountyEntry> top_counties(const CountyYearSlice &slice, std::size_t k, RankBy by) {
    std::vector<CountyEntry> sorted = slice.counties;
    auto key = [by](const CountyEntry &c) { return by == RankBy::deaths ? c.deaths : c.crude_rate; };
    std::sort(sorted.begin(), sorted.end(), [&](const CountyEntry &a, const CountyEntry &b) {
        return key(a) != key(b) ? key(a) > key(b) : a.county_id < b.county_id;
    });
    sorted.resize(std::min(k, sorted.size()));
    return sorted;
}

std::vector<std::size_t> histogram(const std::vector<double> &values, const std::vector<double> &edges) {
    if (edges.size() < 2) {
        throw std::domain_error("histogram needs at least two edges");
    }
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) {
            throw std::domain_error("histogram edges must be strictly increasing");
        }
    }
    std::vector<std::size_t> counts(edges.size() - 1, 0);
    for (double v : values) {
        if (v < edges.front() || !(v < edges.back())) {
            continue;
        }
        const auto it = std::upper_bound(edges.begin(), edges.end(), v);
        ++counts[static_cast<std::size_t>(it - edges.begin()) - 1];
    }
    return counts;
}

} // namespace odassim
