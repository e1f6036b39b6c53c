#pragma once

#include "meslstm/timeseries.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace meslstm {

enum class SeasonalityKind { Additive, Multiplicative };

std::string to_string(SeasonalityKind kind);
SeasonalityKind seasonality_from_string(const std::string& name);

struct SmoothingParams {
    double alpha = 0.3;   ///< level
    double gamma = 0.1;   ///< trend
    double delta = 0.1;   ///< seasonal
    std::size_t period = 7;
    /// When set, the multiplicative seasonal update divides by l_t * b_0
    /// instead of l_t * b_t. The hybrid model drops the trend from its merge
    /// and keeps it frozen here.
    bool freeze_trend_in_seasonal = false;

    void validate() const;
};

/// Level/trend/seasonal estimates for one covariate.
struct CovariateState {
    SeasonalityKind kind = SeasonalityKind::Additive;
    double level = 0.0;
    double trend = 0.0;
    double initial_trend = 0.0;
    /// Indexed by phase: seasonal[t mod P] applies to step t of the training
    /// frame's clock.
    std::vector<double> seasonal;
};

/**
 * @brief Smoothing state for every covariate of a frame.
 *
 * `steps` counts the observations absorbed since the start of the training
 * frame, so the next observation has phase `steps % period`. Additive indices
 * always sum to zero and multiplicative indices have geometric mean one.
 */
struct SmoothingState {
    SmoothingParams params;
    std::vector<CovariateState> covariates;
    std::size_t steps = 0;

    std::size_t size() const noexcept { return covariates.size(); }

    /// Phase of the observation `ahead` steps after the last absorbed one
    /// (ahead = 1 is the next observation).
    std::size_t phase(std::size_t ahead) const noexcept {
        return (steps + ahead - 1) % params.period;
    }

    /// Seasonal index of covariate c for the step `ahead` after the last one.
    double seasonal_ahead(std::size_t c, std::size_t ahead) const {
        return covariates[c].seasonal[phase(ahead)];
    }

    /// Seasonal index of covariate c at the phase of the last absorbed step.
    double seasonal_current(std::size_t c) const {
        return covariates[c].seasonal[(steps + params.period - 1) % params.period];
    }

    /// In-place form of update().
    void absorb(const Eigen::Ref<const Eigen::VectorXd>& y_next);
};

/// Per-step snapshots: states[i] is the state after absorbing step i.
struct StateHistory {
    std::vector<std::int64_t> days;
    std::vector<SmoothingState> states;

    std::size_t size() const noexcept { return states.size(); }
    const SmoothingState& back() const { return states.back(); }
};

/// Initial estimates: in-sample mean level, endpoint trend, and first-period
/// deviations from the level-plus-trend line, standardized.
SmoothingState initialize(const SeriesFrame& train, const SmoothingParams& params,
                          const std::vector<SeasonalityKind>& kinds);
SmoothingState initialize(const SeriesFrame& train, const SmoothingParams& params,
                          SeasonalityKind kind);
/// Single-series form, used by the covariate-wise code paths and tests.
CovariateState initialize_series(std::span<const double> y, const SmoothingParams& params,
                                 SeasonalityKind kind);

/// One smoothing recursion step for all covariates.
SmoothingState update(const SmoothingState& state, const Eigen::Ref<const Eigen::VectorXd>& y_next);

/// One recursion step for a single covariate. `phase` selects the seasonal
/// index being revised.
void update_series(CovariateState& s, double y, std::size_t phase, const SmoothingParams& params);

/// Pure exponential-smoothing forecast, k x m: l + h*b + s (additive) or
/// l * b^h * s (multiplicative) for h = 1..m.
Eigen::MatrixXd pure_es_forecast(const SmoothingState& state, std::size_t horizon);

struct KindSelection {
    std::vector<SeasonalityKind> kinds;
    std::vector<double> additive_sse;
    /// +inf where the multiplicative fit was excluded by non-positive data.
    std::vector<double> multiplicative_sse;
};

/// Runs both recursions over the training frame and keeps, per covariate, the
/// kind with lower one-step-ahead SSE. Ties go to Additive.
KindSelection select_kind(const SeriesFrame& train, const SmoothingParams& params);

/// One-step-ahead SSE of a single series under a kind.
double one_step_sse(std::span<const double> y, const SmoothingParams& params, SeasonalityKind kind);

/// Absorbs every row of `frame` starting from `state`; one snapshot per row.
StateHistory run_history(SmoothingState state, const SeriesFrame& frame);

/// x = y - l - s (additive) or y / (l * s) (multiplicative). Throws
/// DomainError when l * s == 0 for the multiplicative kind.
double deseasonalize_value(SeasonalityKind kind, double y, double level, double seasonal);

/// l + offset * raw + s (additive) or raw * l * s (multiplicative).
double reseasonalize_value(SeasonalityKind kind, double raw, double level, double seasonal,
                           double offset);

/// Inverse of reseasonalize_value for a known actual.
double raw_target_value(SeasonalityKind kind, double actual, double level, double seasonal,
                        double offset);

/// Elementwise deseasonalization of a frame against a history holding one
/// snapshot per row (matched by position; dates must agree).
SeriesFrame deseasonalize(const SeriesFrame& frame, const StateHistory& history);

/// Same as deseasonalize() but for a sub-range of the history.
Eigen::MatrixXd deseasonalize_block(const Eigen::Ref<const Eigen::MatrixXd>& values,
                                    std::span<const SmoothingState> states);

/**
 * Maps a j x m network output back to the data scale using the state at the
 * forecast origin. Column h uses horizon offset h+1 and the seasonal index of
 * step origin + h + 1. `predictands` names the covariate row of each output
 * row.
 */
Eigen::MatrixXd reseasonalize(const Eigen::Ref<const Eigen::MatrixXd>& raw, const SmoothingState& state,
                              std::span<const std::size_t> predictands);

/// Inverse of reseasonalize(): the network output that reproduces `actual`.
Eigen::MatrixXd raw_targets(const Eigen::Ref<const Eigen::MatrixXd>& actual, const SmoothingState& state,
                            std::span<const std::size_t> predictands);

/// Number of smoothing parameters stored: (k + 1) * (2 + P).
std::size_t parameter_count(std::size_t covariates, std::size_t period);

/// JSON checkpoint layout:
/// {"format_version":1, "steps":n, "covariates":{name:{level, trend,
///  initial_trend, seasonal[], kind, params:{alpha,gamma,delta,period,
///  freeze_trend_in_seasonal}}}}
nlohmann::ordered_json state_to_json(const SmoothingState& state, const std::vector<std::string>& names);
SmoothingState state_from_json(const nlohmann::ordered_json& j, std::vector<std::string>* names = nullptr);

}  // namespace meslstm
