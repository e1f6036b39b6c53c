#pragma once

#include "meslstm/ingest.hpp"
#include "meslstm/pipeline.hpp"
#include "meslstm/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace meslstm {

inline constexpr const char* kHybridLabel = "MES-LSTM";
inline constexpr const char* kOlsLabel = "OLS-MLR";
inline constexpr const char* kNaiveLabel = "SeasonalNaive";
/// Country label used for the mean over all countries.
inline constexpr const char* kRegionLabel = "REGION";

struct DataSpec {
    std::filesystem::path path;
    std::vector<std::string> countries;
    std::vector<std::string> features = default_features();
    std::vector<std::string> predictands{"total_cases", "total_deaths"};
    FillPolicy fill = FillPolicy::Default;
    bool drop_per_capita = false;
};

struct ExperimentSpec {
    DataSpec data;
    ModelConfig model;
    /// When set, each country is tuned on its validation split before the trials.
    std::optional<GridSpec> grid;
    bool ols = true;
    bool naive = true;
    std::size_t trials = 1;
    std::vector<double> alphas{0.05, 0.1, 0.2};
    std::uint64_t seed = 0;
    SplitSpec split{};
    std::filesystem::path out = "results";
    std::size_t jobs = 1;

    void validate() const;
};

/// Keys: data{path, countries, features, predictands, fill, drop_per_capita},
/// model{...ModelConfig}, grid{lstm_sizes, epochs, batch_sizes, windows},
/// baselines{ols, naive}, trials, alphas, seed, split{train, validation, test},
/// out, jobs. Relative paths resolve against `base_dir`.
ExperimentSpec experiment_from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment(const std::filesystem::path& file);
nlohmann::ordered_json experiment_to_json(const ExperimentSpec& spec);

struct MetricRow {
    std::string country;
    std::string model;
    std::string predictand;
    std::size_t trial = 0;
    double smape = 0.0;  // fraction scale
    double rmse = 0.0;
    double mae = 0.0;
};

struct IntervalRow {
    std::string country;
    std::string model;
    std::string predictand;
    std::size_t trial = 0;
    double alpha = 0.0;
    double mis = 0.0;
    double coverage = 0.0;  // fraction
};

struct ForecastRow {
    std::string country;
    std::string model;
    std::size_t trial = 0;
    std::int64_t day = 0;
    std::string predictand;
    double actual = 0.0;
    double point = 0.0;
    /// One per report alpha; NaN where the model has no interval.
    std::vector<double> lower;
    std::vector<double> upper;
};

struct TestRow {
    std::string country;
    std::string predictand;
    std::string baseline;
    std::string test;    // "t" or "dm"
    std::string metric;  // smape, rmse, mis_<a>, coverage_<a>, mape
    double statistic = 0.0;
    double p_value = 0.0;
    bool degenerate = false;
    double degrees_of_freedom = 0.0;
    std::size_t skipped = 0;
};

struct TrialError {
    std::string country;
    std::size_t trial = 0;
    std::string message;
    bool divergence = false;
};

struct EvalReport {
    std::vector<double> alphas;
    std::size_t trials = 0;
    std::vector<MetricRow> metrics;
    std::vector<IntervalRow> intervals;
    std::vector<ForecastRow> forecasts;
    std::vector<TestRow> tests;
    std::vector<TrialError> errors;
    std::map<std::string, ModelConfig> tuned;

    bool empty() const noexcept { return metrics.empty() && intervals.empty(); }
};

/// Runs every (country, trial) pair; trial t uses root seed + t. Throws only
/// when every pair failed.
EvalReport run_experiment(const ExperimentSpec& spec, const std::map<std::string, SeriesFrame>& frames);
/// Loads the countries from spec.data first.
EvalReport run_experiment(const ExperimentSpec& spec);

/// Adds t-tests (over trials) and DM tests (trial-averaged hybrid point
/// forecast against each baseline) to `report`.
void add_significance_tests(EvalReport& report);

/// Writes metrics.csv, intervals.csv, forecasts.csv, tests.csv and errors.csv.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

/// Reads the per-trial rows of metrics.csv and intervals.csv back.
EvalReport read_report(const std::filesystem::path& dir);

/// Mean and population std of the per-trial rows, plus REGION rows when the
/// report covers more than one country. Trial index is unused in the result.
struct AggregateRow {
    std::string country;
    std::string model;
    std::string predictand;
    double alpha = 0.0;  // 0 for point metrics
    std::string metric;
    double mean = 0.0;
    double std = 0.0;
};
std::vector<AggregateRow> aggregate(const EvalReport& report);

/// SVG bar charts of trial means and box plots of per-trial values.
/// Returns the written files; throws ContractError on an empty report.
std::vector<std::filesystem::path> emit_plots(const EvalReport& report, const std::filesystem::path& dir);

/// Scores an external forecast CSV (date, predictand, point, lower_<a>,
/// upper_<a>...) against `actual`.
EvalReport evaluate_external(const SeriesFrame& actual, std::istream& forecasts, const std::string& model,
                             const std::string& country);

/// Fixed-precision formatting used by every report file; NaN prints empty.
std::string format_number(double v);

}  // namespace meslstm
