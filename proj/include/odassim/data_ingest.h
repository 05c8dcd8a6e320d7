#pragma once

#include "odassim/population.h"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace odassim {

/// Ordered observation age-bin edges a'_0 < ... < a'_K covering [0, 120].
class AgeBinScheme {
  public:
    explicit AgeBinScheme(std::vector<double> edges);

    /// 22 bins: <1, 1-4, 5-9, ..., 95-99, 100+ (closing at 120).
    static AgeBinScheme nationwide();
    /// 11 bins: <1, 1-4, 5-14, 15-24, ..., 75-84, 85+.
    static AgeBinScheme county_ten_year();
    /// 5-year display bins 0-4, ..., 95-99, 100+.
    static AgeBinScheme five_year();

    std::size_t size() const noexcept { return edges_.size() - 1; }
    double lo(std::size_t k) const { return edges_.at(k); }
    double hi(std::size_t k) const { return edges_.at(k + 1); }
    const std::vector<double> &edges() const noexcept { return edges_; }

    /// Index of the bin [lo, hi) exactly, if present.
    std::optional<std::size_t> find(double lo, double hi) const;
    /// Index of the bin that contains [lo, hi) entirely, if any.
    std::optional<std::size_t> enclosing(double lo, double hi) const;

    bool operator==(const AgeBinScheme &other) const = default;

  private:
    std::vector<double> edges_;
};

enum class Reliability { ok, unreliable, suppressed };

std::string to_string(Reliability r);
Reliability parse_reliability(const std::string &text);

/// A non-fatal ingestion finding (rate rounding mismatch, year gap, skipped row).
struct IngestWarning {
    std::size_t line;
    std::string message;
};

/// One age-group fatality count as read from a file. `*_text` keep the
/// original cells for lossless re-serialization.
struct FatalityRecord {
    int year;
    double age_lo;
    double age_hi;
    std::optional<double> deaths; ///< absent when suppressed
    Reliability reliability;
    std::string year_text, lo_text, hi_text, deaths_text, flag_text;
};

/// Annual counts aligned to a bin scheme; an absent entry means the bin is
/// suppressed or missing for that year and must be masked, never imputed.
struct ObservationYear {
    int year;
    std::vector<std::optional<double>> deaths;
    std::vector<Reliability> reliability;

    double observed_total() const;
};

struct ObservationSeries {
    AgeBinScheme scheme;
    std::vector<ObservationYear> years; ///< ascending
    std::vector<FatalityRecord> records;
    std::vector<int> missing_years; ///< gaps between the first and last year
    std::vector<IngestWarning> warnings;

    const ObservationYear *find(int year) const;
    int first_year() const { return years.front().year; }
    int last_year() const { return years.back().year; }
};

struct CountyRecord {
    std::string county_id;
    std::string county_name;
    int year;
    std::optional<double> deaths;
    std::optional<double> population;
    std::optional<double> crude_rate; ///< per 100,000
    Reliability reliability;
    std::vector<std::string> cells; ///< original cells in canonical column order
};

struct CountyTable {
    std::vector<CountyRecord> records;
    std::vector<IngestWarning> warnings;
    std::size_t dropped_unreliable = 0;
};

/// Population by age band, e.g. county exports in 10-year groups.
struct BandPopulationRow {
    int year;
    double age_lo;
    double age_hi;
    double count;
};

/// Canonical `year, age, population`, or banded `year, age_lo, age_hi,
/// population` which is spread to single ages via county_population_profile.
PopulationTable parse_population(std::istream &in);
PopulationTable parse_population_file(const std::string &path);

/// Canonical `year, age_lo, age_hi, deaths, flag`; an `age_group` label column
/// ("25-29 years", "< 1 year", "85+") may replace age_lo/age_hi. Groups that nest
/// inside one scheme bin are summed into it; a "Total" row is checked against
/// the sum of that year's bins.
ObservationSeries parse_fatalities(std::istream &in, const AgeBinScheme &scheme);
ObservationSeries parse_fatalities_file(const std::string &path, const AgeBinScheme &scheme);

/// Canonical `county_id, county_name, year, deaths, population, crude_rate, flag`.
/// With `strict`, rows with any non-ok entry are dropped.
CountyTable parse_county(std::istream &in, bool strict);
CountyTable parse_county_file(const std::string &path, bool strict);

/// "25-29 years" -> [25, 30), "< 1 year" -> [0, 1), "85+" -> [85, 120).
std::pair<double, double> parse_age_label(const std::string &label);

std::string serialize_fatalities(const ObservationSeries &series);
std::string serialize_county(const CountyTable &table);
std::string serialize_population(const PopulationTable &table);

/// Spreads each band uniformly over its single-year ages. Open-ended top bands
/// (hi > 100) are placed at their lower edge, matching single-age exports whose
/// last row aggregates all older ages. Each band must be present every year.
PopulationTable county_population_profile(const std::vector<BandPopulationRow> &bands,
                                          const AgeBinScheme &scheme);

} // namespace odassim
