#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

namespace meslstm {

/**
 * @brief Multivariate daily series: k covariates by T steps.
 *
 * Dates are day offsets from a dataset epoch (1970-01-01 for ingested data).
 * Values are stored covariate-major, one row per covariate and one column per
 * time step. A frame is immutable once constructed.
 */
class SeriesFrame {
public:
    SeriesFrame() = default;

    /// Throws ContractError when any invariant is violated: strictly
    /// increasing uniform daily dates, finite values, non-empty in-range
    /// predictand indices, one name per row.
    SeriesFrame(std::vector<std::int64_t> days, Eigen::MatrixXd values,
                std::vector<std::string> column_names,
                std::vector<std::size_t> predictand_indices);

    std::size_t covariates() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t length() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    std::size_t predictand_count() const noexcept { return predictands_.size(); }

    const std::vector<std::int64_t>& days() const noexcept { return days_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    const std::vector<std::string>& column_names() const noexcept { return names_; }
    const std::vector<std::size_t>& predictand_indices() const noexcept { return predictands_; }

    /// Rows of the predictand columns, j x T.
    Eigen::MatrixXd predictand_values() const;

    /// Index of a named column; throws ContractError when absent.
    std::size_t column_index(const std::string& name) const;

    /// Half-open time slice [begin, end).
    SeriesFrame slice(std::size_t begin, std::size_t end) const;

    /// Last n steps.
    SeriesFrame tail(std::size_t n) const;

    /// True when both frames have identical column names and predictands.
    bool same_schema(const SeriesFrame& other) const;

    /// Appends `later` (same schema, contiguous dates) to this frame.
    SeriesFrame concat(const SeriesFrame& later) const;

    bool operator==(const SeriesFrame& other) const;

private:
    std::vector<std::int64_t> days_;
    Eigen::MatrixXd values_;
    std::vector<std::string> names_;
    std::vector<std::size_t> predictands_;
};

struct SplitSpec {
    double train_fraction = 0.75;
    double validation_fraction = 0.15;
    double test_fraction = 0.10;

    /// Throws ContractError unless every fraction is in (0,1) and they sum to 1.
    void validate() const;
};

struct Partitions {
    SeriesFrame train;
    SeriesFrame validation;
    SeriesFrame test;
};

/**
 * Chronological 3-way split. Train and validation get floor(T * f) rows, the
 * remainder goes to test. Train must hold at least 2m rows (one full
 * input/target window); validation and test at least m rows (one forecast
 * horizon). Throws SizingError naming every undersized partition.
 */
Partitions split(const SeriesFrame& frame, const SplitSpec& spec, std::size_t window);

/// Rolling (input, target) pairs. Inputs are k x m blocks over every
/// covariate; targets are j x m blocks over the predictands that follow.
struct WindowBatch {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> targets;
    std::vector<std::size_t> origin_indices;

    std::size_t size() const noexcept { return inputs.size(); }
};

/// Number of windows make_windows returns for a series of length T.
std::size_t window_count(std::size_t length, std::size_t window, std::size_t stride = 1);

/// All windows at the given stride. Throws InsufficientDataError when T < 2m.
WindowBatch make_windows(const SeriesFrame& frame, std::size_t window, std::size_t stride = 1);

}  // namespace meslstm
