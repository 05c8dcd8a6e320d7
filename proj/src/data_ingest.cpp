#include "odassim/data_ingest.h"

#include "odassim/errors.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>

namespace odassim {

namespace {

constexpr double open_top_age = 120.0;

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    s = s.substr(first, last - first + 1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = s.substr(1, s.size() - 2);
    }
    return s;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool starts_with_ci(const std::string &s, const std::string &prefix) {
    return lower(s.substr(0, prefix.size())) == prefix;
}

struct Row {
    std::size_t line;
    std::vector<std::string> cells;
};

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;
};

// Tab-separated reader: skips '#' comments, blank lines and '---' rules; a
// "Notes" line, or any single-cell line after a rule, ends the data.
Table read_tsv(std::istream &in) {
    Table table;
    std::string line;
    std::size_t number = 0;
    bool seen_rule = false;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') {
            continue;
        }
        if (stripped.rfind("---", 0) == 0) {
            seen_rule = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream split(line);
        std::string cell;
        while (std::getline(split, cell, '\t')) {
            cells.push_back(trim(cell));
        }
        if (!line.empty() && line.back() == '\t') {
            cells.emplace_back();
        }
        if (table.header.empty()) {
            table.header = cells;
            continue;
        }
        const bool single = std::count_if(cells.begin(), cells.end(), [](const auto &c) { return !c.empty(); }) <= 1;
        if ((single && seen_rule) || (single && starts_with_ci(stripped, "notes"))) {
            break;
        }
        table.rows.push_back({number, std::move(cells)});
    }
    if (table.header.empty()) {
        throw IngestError("file has no header row");
    }
    return table;
}

std::optional<std::size_t> column(const Table &table, std::initializer_list<const char *> aliases) {
    for (const char *alias : aliases) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (lower(table.header[c]) == lower(alias)) {
                return c;
            }
        }
    }
    return std::nullopt;
}

std::size_t require_column(const Table &table, std::initializer_list<const char *> aliases) {
    if (auto c = column(table, aliases)) {
        return *c;
    }
    throw IngestError(std::string("missing required column '") + *aliases.begin() + "'");
}

const std::string &cell(const Row &row, std::size_t c) {
    if (c >= row.cells.size()) {
        throw IngestError("row has " + std::to_string(row.cells.size()) + " cells, expected at least " +
                              std::to_string(c + 1),
                          row.line);
    }
    return row.cells[c];
}

std::optional<double> try_number(const std::string &text) {
    double value = 0.0;
    const char *end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

double number(const std::string &text, std::size_t line, const char *what) {
    if (auto v = try_number(text)) {
        return *v;
    }
    throw IngestError(std::string("malformed ") + what + " '" + text + "'", line);
}

int integer(const std::string &text, std::size_t line, const char *what) {
    int value = 0;
    const char *end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw IngestError(std::string("malformed ") + what + " '" + text + "'", line);
    }
    return value;
}

bool is_total(const std::string &text) { return lower(text) == "total"; }

Reliability worst(Reliability a, Reliability b) { return static_cast<int>(a) > static_cast<int>(b) ? a : b; }

std::string format_number(double x) {
    if (std::abs(x) < 1e15 && x == std::round(x)) {
        return std::to_string(static_cast<long long>(x));
    }
    std::array<char, 32> buffer{};
    auto [ptr, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), x);
    return std::string(buffer.data(), ptr);
}

// A count cell: numeric, or a marker that withholds the value.
struct CountCell {
    std::optional<double> value;
    Reliability reliability = Reliability::ok;
};

CountCell count_cell(const std::string &text, std::size_t line, const char *what) {
    const auto l = lower(text);
    if (l == "suppressed" || l == "missing" || l == "not applicable") {
        return {std::nullopt, Reliability::suppressed};
    }
    if (l == "unreliable") {
        return {std::nullopt, Reliability::unreliable};
    }
    const auto marker = l.find("(unreliable)");
    if (marker != std::string::npos) {
        return {number(trim(text.substr(0, marker)), line, what), Reliability::unreliable};
    }
    const double v = number(text, line, what);
    if (v < 0.0) {
        throw IngestError(std::string("negative ") + what, line);
    }
    return {v, Reliability::ok};
}

std::ifstream open(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'");
    }
    return in;
}

template <typename Parse> auto with_file(const std::string &path, Parse &&parse) {
    auto in = open(path);
    try {
        return parse(in);
    } catch (const IngestError &e) {
        throw IngestError(path + ": " + e.what());
    }
}

} // namespace

AgeBinScheme::AgeBinScheme(std::vector<double> edges) : edges_{std::move(edges)} {
    if (edges_.size() < 2) {
        throw std::domain_error("an age-bin scheme needs at least one bin");
    }
    for (std::size_t k = 1; k < edges_.size(); ++k) {
        if (!(edges_[k] > edges_[k - 1])) {
            throw std::domain_error("age-bin edges must be strictly increasing");
        }
    }
}

AgeBinScheme AgeBinScheme::nationwide() {
    std::vector<double> e{0.0, 1.0};
    for (int a = 5; a <= 100; a += 5) {
        e.push_back(a);
    }
    e.push_back(open_top_age);
    return AgeBinScheme(std::move(e));
}

AgeBinScheme AgeBinScheme::county_ten_year() {
    std::vector<double> e{0.0, 1.0, 5.0};
    for (int a = 15; a <= 85; a += 10) {
        e.push_back(a);
    }
    e.push_back(open_top_age);
    return AgeBinScheme(std::move(e));
}

AgeBinScheme AgeBinScheme::five_year() {
    std::vector<double> e;
    for (int a = 0; a <= 100; a += 5) {
        e.push_back(a);
    }
    e.push_back(open_top_age);
    return AgeBinScheme(std::move(e));
}

std::optional<std::size_t> AgeBinScheme::find(double lo, double hi) const {
    for (std::size_t k = 0; k < size(); ++k) {
        if (edges_[k] == lo && edges_[k + 1] == hi) {
            return k;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> AgeBinScheme::enclosing(double lo, double hi) const {
    for (std::size_t k = 0; k < size(); ++k) {
        if (edges_[k] <= lo && hi <= edges_[k + 1] && lo < hi) {
            return k;
        }
    }
    return std::nullopt;
}

std::string to_string(Reliability r) {
    switch (r) {
    case Reliability::ok:
        return "ok";
    case Reliability::unreliable:
        return "unreliable";
    case Reliability::suppressed:
        return "suppressed";
    }
    return "ok";
}

Reliability parse_reliability(const std::string &text) {
    const auto l = lower(trim(text));
    if (l.empty() || l == "ok") {
        return Reliability::ok;
    }
    if (l == "unreliable") {
        return Reliability::unreliable;
    }
    if (l == "suppressed") {
        return Reliability::suppressed;
    }
    throw IngestError("unknown reliability flag '" + text + "'");
}

double ObservationYear::observed_total() const {
    double total = 0.0;
    for (const auto &d : deaths) {
        total += d.value_or(0.0);
    }
    return total;
}

const ObservationYear *ObservationSeries::find(int year) const {
    for (const auto &y : years) {
        if (y.year == year) {
            return &y;
        }
    }
    return nullptr;
}

std::pair<double, double> parse_age_label(const std::string &label) {
    auto l = lower(trim(label));
    for (const char *suffix : {" years", " year", "years", "year"}) {
        const std::string s(suffix);
        if (l.size() > s.size() && l.compare(l.size() - s.size(), s.size(), s) == 0) {
            l = trim(l.substr(0, l.size() - s.size()));
            break;
        }
    }
    auto whole = [&](const std::string &t) -> std::optional<double> {
        const auto v = try_number(trim(t));
        if (v && *v >= 0.0 && *v == std::floor(*v)) {
            return v;
        }
        return std::nullopt;
    };
    if (!l.empty() && l.front() == '<') {
        if (auto v = whole(l.substr(1)); v && *v > 0.0) {
            return {0.0, *v};
        }
    } else if (!l.empty() && l.back() == '+') {
        if (auto v = whole(l.substr(0, l.size() - 1)); v && *v < open_top_age) {
            return {*v, open_top_age};
        }
    } else if (const auto dash = l.find('-'); dash != std::string::npos) {
        auto lo = whole(l.substr(0, dash));
        auto hi = whole(l.substr(dash + 1));
        if (lo && hi && *hi >= *lo) {
            return {*lo, *hi + 1.0};
        }
    } else if (auto v = whole(l)) {
        return {*v, *v + 1.0};
    }
    throw IngestError("unknown age-group label '" + label + "'");
}

PopulationTable parse_population(std::istream &in) {
    const auto table = read_tsv(in);
    const auto year_col = require_column(table, {"year", "Year Code"});
    const auto pop_col = require_column(table, {"population"});
    const auto age_col = column(table, {"age", "Single-Year Ages Code", "single_year_age"});

    if (age_col) {
        PopulationTable out;
        for (const auto &row : table.rows) {
            const auto &age_text = cell(row, *age_col);
            if (is_total(age_text) || is_total(row.cells.front())) {
                continue;
            }
            int age = 0;
            if (!age_text.empty() && age_text.back() == '+') {
                age = static_cast<int>(parse_age_label(age_text).first);
            } else {
                age = integer(age_text, row.line, "age");
            }
            const double count = number(cell(row, pop_col), row.line, "population");
            if (count < 0.0 || age < 0) {
                throw IngestError("negative age or population", row.line);
            }
            out.rows.push_back({integer(cell(row, year_col), row.line, "year"), age, count});
        }
        out.to_grid();
        return out;
    }

    const auto lo_col = require_column(table, {"age_lo"});
    const auto hi_col = require_column(table, {"age_hi"});
    std::vector<BandPopulationRow> bands;
    std::set<double> edges;
    for (const auto &row : table.rows) {
        BandPopulationRow band{integer(cell(row, year_col), row.line, "year"),
                               number(cell(row, lo_col), row.line, "age_lo"),
                               number(cell(row, hi_col), row.line, "age_hi"),
                               number(cell(row, pop_col), row.line, "population")};
        if (!(band.age_hi > band.age_lo) || band.count < 0.0) {
            throw IngestError("invalid population band", row.line);
        }
        edges.insert(band.age_lo);
        edges.insert(band.age_hi);
        bands.push_back(band);
    }
    return county_population_profile(bands, AgeBinScheme({edges.begin(), edges.end()}));
}

PopulationTable parse_population_file(const std::string &path) {
    return with_file(path, [](std::istream &in) { return parse_population(in); });
}

ObservationSeries parse_fatalities(std::istream &in, const AgeBinScheme &scheme) {
    const auto table = read_tsv(in);
    const auto year_col = require_column(table, {"year", "Year Code"});
    const auto deaths_col = require_column(table, {"deaths"});
    const auto flag_col = column(table, {"flag"});
    const auto lo_col = column(table, {"age_lo"});
    const auto hi_col = column(table, {"age_hi"});
    const auto group_col = column(table, {"age_group", "Five-Year Age Groups", "Ten-Year Age Groups",
                                          "Five-Year Age Groups Code", "Ten-Year Age Groups Code", "Age Group"});
    const auto notes_col = column(table, {"notes"});
    if (!(lo_col && hi_col) && !group_col) {
        throw IngestError("fatality file needs age_lo and age_hi columns or an age_group column");
    }

    struct Accumulator {
        std::vector<double> sum;
        std::vector<double> covered;
        std::vector<Reliability> reliability;
        double not_stated = 0.0;
        std::optional<double> total;
        std::size_t total_line = 0;
    };
    std::map<int, Accumulator> by_year;
    auto accumulator = [&](int year) -> Accumulator & {
        auto [it, inserted] = by_year.try_emplace(year);
        if (inserted) {
            it->second.sum.assign(scheme.size(), 0.0);
            it->second.covered.assign(scheme.size(), 0.0);
            it->second.reliability.assign(scheme.size(), Reliability::ok);
        }
        return it->second;
    };

    ObservationSeries series{scheme, {}, {}, {}, {}};
    for (const auto &row : table.rows) {
        if (notes_col && is_total(cell(row, *notes_col)) && row.cells.size() > year_col &&
            cell(row, year_col).empty()) {
            continue; // grand total across years
        }
        const auto &year_text = cell(row, year_col);
        const int year = integer(year_text, row.line, "year");
        const auto &deaths_text = cell(row, deaths_col);
        auto count = count_cell(deaths_text, row.line, "deaths");
        Reliability flag = flag_col ? parse_reliability(cell(row, *flag_col)) : Reliability::ok;
        if (flag == Reliability::suppressed && count.value) {
            throw IngestError("suppressed row carries a numeric count", row.line);
        }
        count.reliability = worst(count.reliability, flag);

        const bool total_row = (notes_col && is_total(cell(row, *notes_col))) ||
                               (group_col && is_total(cell(row, *group_col))) ||
                               (lo_col && is_total(cell(row, *lo_col)));
        auto &acc = accumulator(year);
        if (total_row) {
            acc.total = count.value;
            acc.total_line = row.line;
            continue;
        }

        std::pair<double, double> range;
        std::string lo_text, hi_text;
        if (lo_col && hi_col) {
            lo_text = cell(row, *lo_col);
            hi_text = cell(row, *hi_col);
            range = {number(lo_text, row.line, "age_lo"), number(hi_text, row.line, "age_hi")};
        } else {
            const auto &label = cell(row, *group_col);
            const auto l = lower(label);
            if (l == "not stated" || l == "unknown") {
                acc.not_stated += count.value.value_or(0.0);
                series.warnings.push_back({row.line, "age group '" + label + "' excluded from bins"});
                continue;
            }
            try {
                range = parse_age_label(label);
            } catch (const IngestError &e) {
                throw IngestError(e.what(), row.line);
            }
            lo_text = format_number(range.first);
            hi_text = format_number(range.second);
        }
        const auto bin = scheme.enclosing(range.first, range.second);
        if (!bin) {
            throw IngestError("age group [" + format_number(range.first) + ", " + format_number(range.second) +
                                  ") does not fit the bin scheme",
                              row.line);
        }
        acc.covered[*bin] += range.second - range.first;
        if (acc.covered[*bin] > scheme.hi(*bin) - scheme.lo(*bin) + 1e-9) {
            throw IngestError("overlapping age groups for year " + std::to_string(year), row.line);
        }
        acc.sum[*bin] += count.value.value_or(0.0);
        acc.reliability[*bin] = worst(acc.reliability[*bin], count.reliability);
        if (!count.value) {
            acc.reliability[*bin] = Reliability::suppressed;
        }

        series.records.push_back({year, range.first, range.second, count.value, count.reliability, year_text,
                                  lo_text, hi_text, deaths_text,
                                  flag_col ? cell(row, *flag_col) : to_string(count.reliability)});
    }

    for (auto &[year, acc] : by_year) {
        ObservationYear y{year, {}, acc.reliability};
        bool complete = true;
        for (std::size_t k = 0; k < scheme.size(); ++k) {
            const bool covered = std::abs(acc.covered[k] - (scheme.hi(k) - scheme.lo(k))) < 1e-9;
            if (!covered) {
                complete = false;
                if (acc.covered[k] > 0.0) {
                    series.warnings.push_back({0, "year " + std::to_string(year) + ": bin [" +
                                                      format_number(scheme.lo(k)) + ", " +
                                                      format_number(scheme.hi(k)) + ") partially covered; masked"});
                }
                y.reliability[k] = Reliability::suppressed;
            }
            if (covered && acc.reliability[k] != Reliability::suppressed) {
                y.deaths.emplace_back(acc.sum[k]);
            } else {
                y.deaths.emplace_back(std::nullopt);
                complete = false;
            }
        }
        if (acc.total && complete) {
            const double sum = y.observed_total() + acc.not_stated;
            if (std::abs(sum - *acc.total) > 0.5) {
                throw IngestError("bins sum to " + format_number(sum) + " but the Total row reads " +
                                      format_number(*acc.total),
                                  acc.total_line);
            }
        }
        series.years.push_back(std::move(y));
    }
    if (series.years.empty()) {
        throw IngestError("fatality file has no data rows");
    }
    for (int year = series.first_year(); year <= series.last_year(); ++year) {
        if (!by_year.count(year)) {
            series.missing_years.push_back(year);
            series.warnings.push_back({0, "no observations for year " + std::to_string(year)});
        }
    }
    return series;
}

ObservationSeries parse_fatalities_file(const std::string &path, const AgeBinScheme &scheme) {
    return with_file(path, [&](std::istream &in) { return parse_fatalities(in, scheme); });
}

CountyTable parse_county(std::istream &in, bool strict) {
    const auto table = read_tsv(in);
    const std::array<std::size_t, 6> cols{
        require_column(table, {"county_id", "County Code"}),
        require_column(table, {"county_name", "County"}),
        require_column(table, {"year", "Year Code"}),
        require_column(table, {"deaths"}),
        require_column(table, {"population"}),
        require_column(table, {"crude_rate", "Crude Rate"}),
    };
    const auto flag_col = column(table, {"flag"});
    const auto notes_col = column(table, {"notes"});

    CountyTable out;
    std::set<std::pair<std::string, int>> seen;
    for (const auto &row : table.rows) {
        if ((notes_col && is_total(cell(row, *notes_col))) || is_total(cell(row, cols[1])) ||
            cell(row, cols[0]).empty()) {
            continue;
        }
        CountyRecord rec;
        rec.county_id = cell(row, cols[0]);
        rec.county_name = cell(row, cols[1]);
        rec.year = integer(cell(row, cols[2]), row.line, "year");
        const auto deaths = count_cell(cell(row, cols[3]), row.line, "deaths");
        const auto population = count_cell(cell(row, cols[4]), row.line, "population");
        const auto rate = count_cell(cell(row, cols[5]), row.line, "crude_rate");
        rec.deaths = deaths.value;
        rec.population = population.value;
        rec.crude_rate = rate.value;
        rec.reliability = worst(worst(deaths.reliability, population.reliability), rate.reliability);
        if (flag_col) {
            const auto flag = parse_reliability(cell(row, *flag_col));
            if (flag == Reliability::suppressed && rec.deaths) {
                throw IngestError("suppressed row carries a numeric death count", row.line);
            }
            rec.reliability = worst(rec.reliability, flag);
        }
        if (!rec.deaths) {
            rec.reliability = worst(rec.reliability, Reliability::suppressed);
        }
        for (std::size_t c = 0; c < 6; ++c) {
            rec.cells.push_back(cell(row, cols[c]));
        }
        rec.cells.push_back(flag_col ? cell(row, *flag_col) : to_string(rec.reliability));

        if (!seen.insert({rec.county_id, rec.year}).second) {
            throw IngestError("duplicate county-year (" + rec.county_id + ", " + std::to_string(rec.year) + ")",
                              row.line);
        }
        if (rec.reliability == Reliability::ok && rec.deaths && rec.population && rec.crude_rate) {
            if (!(*rec.population > 0.0)) {
                throw IngestError("county population must be positive", row.line);
            }
            const double expected = 1e5 * *rec.deaths / *rec.population;
            if (std::abs(*rec.crude_rate - expected) > 0.6) {
                out.warnings.push_back({row.line, "crude rate " + cell(row, cols[5]) + " differs from " +
                                                      format_number(std::round(expected * 10.0) / 10.0) +
                                                      " implied by deaths/population"});
            }
        }
        if (strict && rec.reliability != Reliability::ok) {
            ++out.dropped_unreliable;
            continue;
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

CountyTable parse_county_file(const std::string &path, bool strict) {
    return with_file(path, [&](std::istream &in) { return parse_county(in, strict); });
}

std::string serialize_fatalities(const ObservationSeries &series) {
    std::string out = "year\tage_lo\tage_hi\tdeaths\tflag\n";
    for (const auto &r : series.records) {
        out += r.year_text + '\t' + r.lo_text + '\t' + r.hi_text + '\t' + r.deaths_text + '\t' + r.flag_text + '\n';
    }
    return out;
}

std::string serialize_county(const CountyTable &table) {
    std::string out = "county_id\tcounty_name\tyear\tdeaths\tpopulation\tcrude_rate\tflag\n";
    for (const auto &r : table.records) {
        for (std::size_t c = 0; c < r.cells.size(); ++c) {
            out += r.cells[c];
            out += c + 1 < r.cells.size() ? '\t' : '\n';
        }
    }
    return out;
}

std::string serialize_population(const PopulationTable &table) {
    std::string out = "year\tage\tpopulation\n";
    for (const auto &r : table.rows) {
        out += std::to_string(r.year) + '\t' + std::to_string(r.age) + '\t' + format_number(r.count) + '\n';
    }
    return out;
}

PopulationTable county_population_profile(const std::vector<BandPopulationRow> &bands,
                                          const AgeBinScheme &scheme) {
    std::map<int, std::vector<const BandPopulationRow *>> by_year;
    for (const auto &b : bands) {
        by_year[b.year].push_back(&b);
    }
    PopulationTable out;
    for (const auto &[year, rows] : by_year) {
        std::vector<const BandPopulationRow *> slot(scheme.size(), nullptr);
        for (const auto *b : rows) {
            const auto k = scheme.find(b->age_lo, b->age_hi);
            if (!k) {
                throw IngestError("population band [" + format_number(b->age_lo) + ", " + format_number(b->age_hi) +
                                  ") is not in the age scheme");
            }
            if (slot[*k]) {
                throw IngestError("duplicate population band for year " + std::to_string(year));
            }
            slot[*k] = b;
        }
        for (std::size_t k = 0; k < scheme.size(); ++k) {
            if (!slot[k]) {
                throw IngestError("year " + std::to_string(year) + " is missing population band [" +
                                  format_number(scheme.lo(k)) + ", " + format_number(scheme.hi(k)) + ")");
            }
            const auto lo = static_cast<int>(scheme.lo(k));
            const auto hi = static_cast<int>(scheme.hi(k));
            if (lo != scheme.lo(k) || hi != scheme.hi(k)) {
                throw IngestError("population bands must have whole-year edges");
            }
            const double count = slot[k]->count;
            if (scheme.hi(k) > 100.0) {
                out.rows.push_back({year, lo, count});
                continue;
            }
            const int width = hi - lo;
            const double share = count / width;
            for (int a = lo; a < hi - 1; ++a) {
                out.rows.push_back({year, a, share});
            }
            out.rows.push_back({year, hi - 1, count - share * (width - 1)});
        }
    }
    return out;
}

} // namespace odassim
