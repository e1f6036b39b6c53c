#pragma once

#include "meslstm/timeseries.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace meslstm {

/// Days since 1970-01-01 for an ISO "YYYY-MM-DD" date.
std::int64_t parse_iso_date(std::string_view text);
std::string format_iso_date(std::int64_t day);

/// Default OWID feature subset (underscore column names).
const std::vector<std::string>& default_features();
/// The 16 SADC member states as OWID `location` strings.
const std::vector<std::string>& sadc_countries();

enum class FillPolicy {
    /// Cumulative counters: forward-fill then leading zeros; everything else:
    /// forward-fill then backfill.
    Default,
    /// Forward-fill only; leading gaps are an error.
    ForwardOnly,
};

struct IngestSpec {
    std::filesystem::path path;
    std::string country;
    std::vector<std::string> features = default_features();
    std::vector<std::string> predictands{"total_cases", "total_deaths"};
    FillPolicy fill = FillPolicy::Default;
    /// Drop *_per_million / *_per_hundred / *_per_thousand duplicates.
    bool drop_per_capita = false;

    void validate() const;
};

struct LoadResult {
    std::string location;
    SeriesFrame frame;
    std::vector<std::string> warnings;
};

/// An OWID-schema CSV held in memory, rows grouped by `location`.
class OwidTable {
public:
    static OwidTable read(const std::filesystem::path& path);
    static OwidTable parse(std::istream& in, const std::string& source = "<stream>");

    const std::vector<std::string>& header() const noexcept { return header_; }
    std::vector<std::string> locations() const;
    /// Exact match first, then case-insensitive; throws DataError when absent.
    const std::string& resolve(const std::string& country) const;

    LoadResult load(const IngestSpec& spec) const;

private:
    std::vector<std::string> header_;
    std::size_t location_col_ = 0;
    std::size_t date_col_ = 0;
    std::map<std::string, std::vector<std::vector<std::string>>> rows_;
    std::string source_;
};

LoadResult load(const IngestSpec& spec);

struct MultiLoad {
    std::map<std::string, LoadResult> frames;
    /// Country (as requested) -> error message.
    std::map<std::string, std::string> errors;
};

/// Loads each country from `base.path`; failures are collected, not thrown.
MultiLoad multi_load(const IngestSpec& base, const std::vector<std::string>& countries);

/// Normalized dump: date column then one column per covariate.
void write_frame_csv(std::ostream& os, const SeriesFrame& frame);

/// Splits one CSV record, honouring double quotes.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace meslstm
