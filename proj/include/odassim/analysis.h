#pragma once

#include "odassim/data_ingest.h"

#include <string>
#include <vector>

namespace odassim {

/// Deaths per 100,000 persons.
double crude_rate(double deaths, double population);

struct CountyEntry {
    std::string county_id;
    std::string county_name;
    double deaths;
    double population;
    double crude_rate;
};

/// One year of counties that pass the reliability and significance filters.
struct CountyYearSlice {
    int year;
    std::vector<CountyEntry> counties;
};

struct SliceOptions {
    double min_deaths = 10.0; ///< counties need deaths >= this
    bool strict = true;       ///< drop any row not flagged ok
};

/// Builds the slice for `year`; the crude rate is recomputed from deaths and population.
CountyYearSlice build_slice(const CountyTable &table, int year, const SliceOptions &options = {});
/// Years present in the table, ascending.
std::vector<int> county_years(const CountyTable &table);

/// Lorenz-curve Gini index: counties sorted by crude rate ascending, cumulative
/// population share against cumulative death share, 1 - 2·(trapezoid area).
double gini_index(const CountyYearSlice &slice);

/// Population-weighted mean absolute difference of crude rates over twice the
/// weighted mean; equals the Lorenz form, used as an independent check.
double gini_pairwise(const CountyYearSlice &slice);

double mean_crude_rate(const CountyYearSlice &slice);

enum class RankBy { deaths, crude_rate };

/// Top k counties, descending, ties broken by county_id ascending.
std::vector<CountyEntry> top_counties(const CountyYearSlice &slice, std::size_t k, RankBy by);

/// Counts per [edges[i], edges[i+1]); values outside [edges.front(), edges.back()) are not counted.
std::vector<std::size_t> histogram(const std::vector<double> &values, const std::vector<double> &edges);

} // namespace odassim
