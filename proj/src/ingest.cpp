#include "meslstm/ingest.hpp"

#include "meslstm/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace meslstm {

std::int64_t parse_iso_date(std::string_view text) {
    auto bad = [&] { return DataError("invalid ISO date '" + std::string(text) + "'"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
    auto field = [&](std::size_t pos, std::size_t len) {
        int v = 0;
        const auto* first = text.data() + pos;
        const auto [ptr, ec] = std::from_chars(first, first + len, v);
        if (ec != std::errc{} || ptr != first + len) throw bad();
        return v;
    };
    const std::chrono::year_month_day ymd{std::chrono::year{field(0, 4)},
                                          std::chrono::month{static_cast<unsigned>(field(5, 2))},
                                          std::chrono::day{static_cast<unsigned>(field(8, 2))}};
    if (!ymd.ok()) throw bad();
    return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

std::string format_iso_date(std::int64_t day) {
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{day}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

const std::vector<std::string>& default_features() {
    static const std::vector<std::string> f{
        "total_cases", "new_cases", "total_cases_per_million", "new_cases_per_million",
        "total_deaths", "new_deaths", "total_deaths_per_million", "new_deaths_per_million",
        "icu_patients", "icu_patients_per_million", "hosp_patients", "weekly_icu_admissions",
        "weekly_icu_admissions_per_million", "weekly_hosp_admissions", "weekly_hosp_admissions_per_million",
        "stringency_index", "reproduction_rate", "total_tests", "new_tests", "positive_rate", "tests_per_case",
        "total_vaccinations", "people_vaccinated", "people_fully_vaccinated", "new_vaccinations",
        "total_vaccinations_per_hundred", "people_vaccinated_per_hundred", "people_fully_vaccinated_per_hundred",
        "population", "population_density", "median_age", "aged_65_older", "aged_70_older", "gdp_per_capita",
        "extreme_poverty", "cardiovasc_death_rate", "diabetes_prevalence", "female_smokers", "male_smokers",
        "handwashing_facilities", "hospital_beds_per_thousand", "life_expectancy", "human_development_index",
        "excess_mortality"};
    return f;
}

const std::vector<std::string>& sadc_countries() {
    static const std::vector<std::string> c{
        "Angola", "Botswana", "Comoros", "Democratic Republic of Congo", "Eswatini", "Lesotho",
        "Madagascar", "Malawi", "Mauritius", "Mozambique", "Namibia", "Seychelles", "South Africa",
        "Tanzania", "Zambia", "Zimbabwe"};
    return c;
}

void IngestSpec::validate() const {
    if (predictands.empty()) throw ContractError("ingest: at least one predictand required");
    for (const auto& p : predictands) {
        if (std::find(features.begin(), features.end(), p) == features.end()) {
            throw ContractError("ingest: predictand '" + p + "' is not in the feature list");
        }
    }
}

std::vector<std::string> split_csv_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (quoted) throw DataError("unterminated quoted field");
    out.push_back(std::move(cur));
    return out;
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool cumulative(const std::string& name) { return name.rfind("total_", 0) == 0 || name.rfind("people_", 0) == 0; }

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

double parse_number(const std::string& field, const std::string& column, const std::string& date) {
    if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw DataError("non-numeric value '" + field + "' in column " + column + " on " + date);
    }
    return v;
}

}  // namespace

OwidTable OwidTable::parse(std::istream& in, const std::string& source) {
    OwidTable t;
    t.source_ = source;
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty file");
    t.header_ = split_csv_line(line);
    auto find = [&](const char* name) {
        const auto it = std::find(t.header_.begin(), t.header_.end(), name);
        if (it == t.header_.end()) throw DataError(source + ": missing '" + name + "' column");
        return static_cast<std::size_t>(it - t.header_.begin());
    };
    t.location_col_ = find("location");
    t.date_col_ = find("date");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (fields.size() != t.header_.size()) {
            throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header_.size()) +
                            " fields, found " + std::to_string(fields.size()));
        }
        std::string loc = fields[t.location_col_];
        t.rows_[loc].push_back(std::move(fields));
    }
    return t;
}

OwidTable OwidTable::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    return parse(in, path.string());
}

std::vector<std::string> OwidTable::locations() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : rows_) out.push_back(k);
    return out;
}

const std::string& OwidTable::resolve(const std::string& country) const {
    if (const auto it = rows_.find(country); it != rows_.end()) return it->first;
    const std::string want = lower(country);
    for (const auto& [k, v] : rows_) {
        if (lower(k) == want) return k;
    }
    throw DataError("unknown country '" + country + "' in " + source_);
}

LoadResult OwidTable::load(const IngestSpec& spec) const {
    spec.validate();
    LoadResult res;
    res.location = resolve(spec.country);
    const auto& rows = rows_.at(res.location);

    // Column projection.
    std::vector<std::string> names;
    std::vector<std::size_t> cols;
    for (const auto& f : spec.features) {
        const bool is_pred = std::find(spec.predictands.begin(), spec.predictands.end(), f) != spec.predictands.end();
        if (f.find("_smoothed") != std::string::npos) {
            res.warnings.push_back("excluded smoothed column " + f);
            continue;
        }
        if (spec.drop_per_capita && !is_pred && (ends_with(f, "_per_million") || ends_with(f, "_per_hundred"))) {
            continue;
        }
        const auto it = std::find(header_.begin(), header_.end(), f);
        if (it == header_.end()) {
            if (is_pred) throw DataError("predictand column '" + f + "' absent from " + source_);
            res.warnings.push_back("column " + f + " absent; dropped");
            continue;
        }
        names.push_back(f);
        cols.push_back(static_cast<std::size_t>(it - header_.begin()));
    }

    // Sort rows by date, last duplicate wins.
    std::map<std::int64_t, const std::vector<std::string>*> by_day;
    for (const auto& r : rows) {
        const std::int64_t d = parse_iso_date(r[date_col_]);
        if (by_day.count(d)) res.warnings.push_back("duplicate date " + r[date_col_] + "; last row kept");
        by_day[d] = &r;
    }
    if (by_day.empty()) throw DataError("no rows for " + res.location);
    const std::int64_t first = by_day.begin()->first;
    const std::int64_t last = by_day.rbegin()->first;
    const auto T = static_cast<Eigen::Index>(last - first + 1);
    if (static_cast<std::size_t>(T) != by_day.size()) {
        res.warnings.push_back(std::to_string(T - static_cast<Eigen::Index>(by_day.size())) +
                               " missing calendar day(s) reindexed");
    }

    Eigen::MatrixXd raw = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(cols.size()), T,
                                                    std::numeric_limits<double>::quiet_NaN());
    for (const auto& [d, r] : by_day) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            raw(static_cast<Eigen::Index>(c), d - first) = parse_number((*r)[cols[c]], names[c], (*r)[date_col_]);
        }
    }

    // Fill, dropping all-missing optional columns.
    std::vector<std::string> kept_names;
    std::vector<Eigen::Index> kept_rows;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        auto row = raw.row(static_cast<Eigen::Index>(c));
        const bool is_pred =
            std::find(spec.predictands.begin(), spec.predictands.end(), names[c]) != spec.predictands.end();
        Eigen::Index first_obs = -1;
        for (Eigen::Index t = 0; t < T; ++t) {
            if (!std::isnan(row(t))) {
                first_obs = t;
                break;
            }
        }
        if (first_obs < 0) {
            if (is_pred) throw DataError("predictand '" + names[c] + "' has no observations for " + res.location);
            res.warnings.push_back("column " + names[c] + " has no observations; dropped");
            continue;
        }
        for (Eigen::Index t = first_obs + 1; t < T; ++t) {
            if (std::isnan(row(t))) row(t) = row(t - 1);
        }
        if (first_obs > 0) {
            if (spec.fill == FillPolicy::ForwardOnly) {
                throw DataError("column " + names[c] + " has leading gaps for " + res.location);
            }
            const double lead = cumulative(names[c]) ? 0.0 : row(first_obs);
            for (Eigen::Index t = 0; t < first_obs; ++t) row(t) = lead;
        }
        if (is_pred && cumulative(names[c])) {
            std::size_t drops = 0;
            for (Eigen::Index t = 1; t < T; ++t) {
                if (row(t) < row(t - 1)) ++drops;
            }
            if (drops > 0) {
                res.warnings.push_back("cumulative column " + names[c] + " decreases on " + std::to_string(drops) +
                                       " day(s)");
            }
        }
        kept_names.push_back(names[c]);
        kept_rows.push_back(static_cast<Eigen::Index>(c));
    }

    Eigen::MatrixXd values(static_cast<Eigen::Index>(kept_rows.size()), T);
    for (std::size_t i = 0; i < kept_rows.size(); ++i) values.row(static_cast<Eigen::Index>(i)) = raw.row(kept_rows[i]);
    std::vector<std::size_t> pred_idx;
    for (const auto& p : spec.predictands) {
        pred_idx.push_back(
            static_cast<std::size_t>(std::find(kept_names.begin(), kept_names.end(), p) - kept_names.begin()));
    }
    std::vector<std::int64_t> days(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) days[static_cast<std::size_t>(t)] = first + t;
    res.frame = SeriesFrame(std::move(days), std::move(values), std::move(kept_names), std::move(pred_idx));
    return res;
}

LoadResult load(const IngestSpec& spec) { return OwidTable::read(spec.path).load(spec); }

MultiLoad multi_load(const IngestSpec& base, const std::vector<std::string>& countries) {
    MultiLoad out;
    if (countries.empty()) return out;
    const OwidTable table = OwidTable::read(base.path);
    for (const auto& c : countries) {
        IngestSpec spec = base;
        spec.country = c;
        try {
            out.frames.emplace(c, table.load(spec));
        } catch (const Error& e) {
            out.errors.emplace(c, e.what());
        }
    }
    return out;
}

void write_frame_csv(std::ostream& os, const SeriesFrame& frame) {
    os << "date";
    for (const auto& n : frame.column_names()) os << ',' << n;
    os << '\n';
    std::ostringstream cell;
    cell.precision(17);
    for (std::size_t t = 0; t < frame.length(); ++t) {
        os << format_iso_date(frame.days()[t]);
        for (std::size_t c = 0; c < frame.covariates(); ++c) {
            cell.str("");
            cell << frame.values()(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t));
            os << ',' << cell.str();
        }
        os << '\n';
    }
}

}  // namespace meslstm
