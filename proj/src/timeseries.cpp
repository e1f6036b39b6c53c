#include "meslstm/timeseries.hpp"

#include "meslstm/error.hpp"

#include <cmath>
#include <sstream>

namespace meslstm {

SeriesFrame::SeriesFrame(std::vector<std::int64_t> days, Eigen::MatrixXd values,
                         std::vector<std::string> column_names,
                         std::vector<std::size_t> predictand_indices)
    : days_(std::move(days)),
      values_(std::move(values)),
      names_(std::move(column_names)),
      predictands_(std::move(predictand_indices)) {
    if (static_cast<std::size_t>(values_.cols()) != days_.size()) {
        throw ContractError("SeriesFrame: " + std::to_string(days_.size()) + " dates for " +
                            std::to_string(values_.cols()) + " value columns");
    }
    if (static_cast<std::size_t>(values_.rows()) != names_.size()) {
        throw ContractError("SeriesFrame: column name count does not match covariate count");
    }
    for (std::size_t t = 1; t < days_.size(); ++t) {
        if (days_[t] != days_[t - 1] + 1) {
            throw ContractError("SeriesFrame: dates must be strictly increasing with daily spacing");
        }
    }
    if (!values_.allFinite()) {
        throw ContractError("SeriesFrame: values contain missing or non-finite entries");
    }
    if (predictands_.empty()) {
        throw ContractError("SeriesFrame: at least one predictand is required");
    }
    for (std::size_t idx : predictands_) {
        if (idx >= names_.size()) {
            throw ContractError("SeriesFrame: predictand index " + std::to_string(idx) +
                                " out of range");
        }
    }
}

Eigen::MatrixXd SeriesFrame::predictand_values() const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(predictands_.size()), values_.cols());
    for (std::size_t p = 0; p < predictands_.size(); ++p) {
        out.row(static_cast<Eigen::Index>(p)) = values_.row(static_cast<Eigen::Index>(predictands_[p]));
    }
    return out;
}

std::size_t SeriesFrame::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    throw ContractError("SeriesFrame: no column named '" + name + "'");
}

SeriesFrame SeriesFrame::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > length()) {
        throw ContractError("SeriesFrame::slice: range out of bounds");
    }
    const auto b = static_cast<Eigen::Index>(begin);
    const auto n = static_cast<Eigen::Index>(end - begin);
    std::vector<std::int64_t> days(days_.begin() + b, days_.begin() + b + n);
    return SeriesFrame(std::move(days), values_.middleCols(b, n), names_, predictands_);
}

SeriesFrame SeriesFrame::tail(std::size_t n) const {
    if (n > length()) throw ContractError("SeriesFrame::tail: longer than frame");
    return slice(length() - n, length());
}

bool SeriesFrame::same_schema(const SeriesFrame& other) const {
    return names_ == other.names_ && predictands_ == other.predictands_;
}

SeriesFrame SeriesFrame::concat(const SeriesFrame& later) const {
    if (!same_schema(later)) throw ContractError("SeriesFrame::concat: schema mismatch");
    if (length() == 0) return later;
    if (later.length() == 0) return *this;
    Eigen::MatrixXd joined(values_.rows(), values_.cols() + later.values_.cols());
    joined << values_, later.values_;
    std::vector<std::int64_t> days = days_;
    days.insert(days.end(), later.days_.begin(), later.days_.end());
    return SeriesFrame(std::move(days), std::move(joined), names_, predictands_);
}

bool SeriesFrame::operator==(const SeriesFrame& other) const {
    return days_ == other.days_ && names_ == other.names_ && predictands_ == other.predictands_ &&
           values_.rows() == other.values_.rows() && values_.cols() == other.values_.cols() &&
           values_ == other.values_;
}

void SplitSpec::validate() const {
    for (double f : {train_fraction, validation_fraction, test_fraction}) {
        if (!(f > 0.0 && f < 1.0)) throw ContractError("SplitSpec: fractions must lie in (0,1)");
    }
    if (std::abs(train_fraction + validation_fraction + test_fraction - 1.0) > 1e-9) {
        throw ContractError("SplitSpec: fractions must sum to 1");
    }
}

Partitions split(const SeriesFrame& frame, const SplitSpec& spec, std::size_t window) {
    spec.validate();
    if (window == 0) throw ContractError("split: window must be positive");
    const std::size_t total = frame.length();
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(total) * spec.train_fraction));
    const auto n_val =
        static_cast<std::size_t>(std::floor(static_cast<double>(total) * spec.validation_fraction));
    const std::size_t n_test = total - n_train - n_val;

    struct Need {
        const char* name;
        std::size_t have;
        std::size_t need;
    };
    const Need needs[] = {{"train", n_train, 2 * window},
                          {"validation", n_val, window},
                          {"test", n_test, window}};
    // The error names the partition furthest below its requirement.
    std::ostringstream msg;
    std::string worst;
    double worst_ratio = 1.0;
    for (const auto& n : needs) {
        if (n.have < n.need) {
            if (worst.empty()) msg << "split: partition too small for window " << window << ":";
            msg << " " << n.name << " gets " << n.have << " < " << n.need << " rows;";
            const double ratio = static_cast<double>(n.have) / static_cast<double>(n.need);
            if (worst.empty() || ratio < worst_ratio) {
                worst = n.name;
                worst_ratio = ratio;
            }
        }
    }
    if (!worst.empty()) throw SizingError(worst, msg.str());

    return {frame.slice(0, n_train), frame.slice(n_train, n_train + n_val),
            frame.slice(n_train + n_val, total)};
}

std::size_t window_count(std::size_t length, std::size_t window, std::size_t stride) {
    if (window == 0 || stride == 0 || length < 2 * window) return 0;
    return (length - 2 * window) / stride + 1;
}

WindowBatch make_windows(const SeriesFrame& frame, std::size_t window, std::size_t stride) {
    if (window == 0 || stride == 0) throw ContractError("make_windows: window and stride must be positive");
    if (frame.length() < 2 * window) {
        throw InsufficientDataError("make_windows: need at least " + std::to_string(2 * window) +
                                    " steps, have " + std::to_string(frame.length()));
    }
    const std::size_t count = window_count(frame.length(), window, stride);
    const Eigen::MatrixXd targets_all = frame.predictand_values();
    const auto m = static_cast<Eigen::Index>(window);

    WindowBatch batch;
    batch.inputs.reserve(count);
    batch.targets.reserve(count);
    batch.origin_indices.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const auto origin = static_cast<Eigen::Index>(w * stride);
        batch.inputs.emplace_back(frame.values().middleCols(origin, m));
        batch.targets.emplace_back(targets_all.middleCols(origin + m, m));
        batch.origin_indices.push_back(static_cast<std::size_t>(origin));
    }
    return batch;
}

}  // namespace meslstm
