#pragma once

#include "meslstm/neural.hpp"
#include "meslstm/smoothing.hpp"
#include "meslstm/timeseries.hpp"
#include "meslstm/variational.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace meslstm {

enum class SeasonalityOverride { Auto, Additive, Multiplicative };

std::string to_string(SeasonalityOverride s);
SeasonalityOverride seasonality_override_from_string(const std::string& name);

/// Hyperparameters of the hybrid model. Defaults are the tuned
/// configuration: LSTM of size 50, 25 epochs, batches of 16, 14-day window.
struct ModelConfig {
    std::size_t lstm_size = 50;
    std::size_t epochs = 25;
    std::size_t batch_size = 16;
    std::size_t window = 14;
    std::size_t stride = 1;
    SmoothingParams smoothing{0.3, 0.1, 0.1, 7, true};
    SeasonalityOverride seasonality = SeasonalityOverride::Auto;
    std::size_t mc_samples = 200;
    std::vector<double> alphas{0.05, 0.1, 0.2};
    std::uint64_t seed = 0;
    AdamOptions adam{};
    /// Global gradient-norm clip; 0 disables.
    double clip_norm = 0.0;
    Activation output_activation = Activation::Identity;
    double initial_sigma = 0.05;
    /// Give the variational head's bias its own posterior scale.
    bool stochastic_bias = true;
    /// Multiplier on the 1/N KL scaling.
    double kl_scale = 1.0;

    void validate() const;
};

nlohmann::ordered_json config_to_json(const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig config_from_json(const nlohmann::ordered_json& j, ModelConfig base = {});

/// Affine map between network space and data space: data = mean + scale * net.
struct AffineScaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;
};

struct PointNetwork {
    LstmLayer lstm;
    DenseLayer head;
};

struct VariationalNetwork {
    LstmLayer lstm;
    FlipoutDense head;
};

struct EpochDiagnostics {
    double point_train = 0.0;
    double point_validation = 0.0;
    /// MAE + KL / N.
    double variational_train = 0.0;
    double variational_validation = 0.0;
};

/**
 * @brief Trained hybrid model.
 *
 * `history` holds one smoothing snapshot per absorbed row; after fit() it
 * covers exactly the training frame, and extend() appends later rows.
 */
struct FittedModel {
    ModelConfig config;
    std::vector<std::string> column_names;
    std::vector<std::size_t> predictand_indices;
    std::vector<SeasonalityKind> kinds;
    StateHistory history;
    AffineScaler input_scaler;
    AffineScaler target_scaler;
    PointNetwork point;
    VariationalNetwork variational;
    std::vector<EpochDiagnostics> diagnostics;
    std::size_t training_length = 0;
    std::size_t training_examples = 0;
    bool trained = false;

    std::size_t window() const noexcept { return config.window; }
    std::size_t predictands() const noexcept { return predictand_indices.size(); }
    std::int64_t last_day() const { return history.days.back(); }
};

struct ForecastResult {
    std::vector<std::int64_t> days;
    /// j x m point forecast from the deterministic head.
    Eigen::MatrixXd point;
    /// One per configured significance level, same order as config.alphas.
    std::vector<Interval> intervals;
    ForecastDistribution distribution;
};

/// Smoothing pass, deseasonalization, windowing and training of both heads.
FittedModel fit(const SeriesFrame& train, const SeriesFrame& validation, const ModelConfig& config);

/// Rolls the smoothing state through `later`, which must start the day after
/// the model's last absorbed day.
FittedModel extend(FittedModel model, const SeriesFrame& later);

/// Raw deterministic-head output (j x m, data-space residual units) for a
/// context already covered by the model's history.
Eigen::MatrixXd point_raw(const FittedModel& model, const SeriesFrame& context);

/// Monte-Carlo samples through the variational head, each reseasonalized.
ForecastDistribution sample_forecasts(const FittedModel& model, const SeriesFrame& context,
                                      std::size_t n_samples, std::uint64_t seed);

/**
 * Forecasts the m steps after `context` (m rows, ending at or after the
 * model's last absorbed day; newer rows are absorbed into a copy first).
 */
ForecastResult predict(const FittedModel& model, const SeriesFrame& context, std::uint64_t seed);
ForecastResult predict(const FittedModel& model, const SeriesFrame& context);

/// Point and interval forecasts scored block-by-block over a segment.
struct SegmentForecast {
    std::vector<std::int64_t> days;
    Eigen::MatrixXd actual;  // j x n
    Eigen::MatrixXd point;   // j x n
    std::vector<Interval> intervals;
};

/// Forecasts `segment` in consecutive m-step blocks. Each block uses the m
/// rows before it as context; the model is rolled forward with the block's
/// actuals afterwards. `model` must end at prior's last day.
SegmentForecast forecast_segment(const FittedModel& model, const SeriesFrame& prior, const SeriesFrame& segment,
                                 std::uint64_t seed);

/// Trainable parameters of the point network.
std::size_t network_parameter_count(std::size_t covariates, std::size_t predictands, std::size_t lstm_size,
                                    std::size_t window);

struct GridSpec {
    std::vector<std::size_t> lstm_sizes;
    std::vector<std::size_t> epochs;
    std::vector<std::size_t> batch_sizes;
    std::vector<std::size_t> windows;
    ModelConfig base;

    /// The full search space: S 50..150 step 5, epochs 15..75 step 5, batch
    /// 8..64 step 8, window {7, 14, 21}.
    static GridSpec full();
    std::vector<ModelConfig> expand() const;
};

struct GridEntry {
    ModelConfig config;
    double validation_smape = 0.0;
    std::size_t parameters = 0;
    std::string error;
};

struct GridOutcome {
    ModelConfig best;
    std::vector<GridEntry> entries;
};

/// Most parsimonious of the five configurations with the lowest validation
/// sMAPE (mean over predictands); ties by smaller S, then fewer epochs.
GridOutcome grid_search(const SeriesFrame& train, const SeriesFrame& validation, const GridSpec& grid,
                        std::size_t jobs = 1);

/// Selection rule alone, over already-scored entries.
std::size_t select_parsimonious(const std::vector<GridEntry>& entries, std::size_t top = 5);

nlohmann::ordered_json model_to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::ordered_json& j);

/// Directory layout: config.json, smoothing.json (final state),
/// history.json (per-step snapshots) and params.json (networks, scalers,
/// diagnostics). Each file carries "format_version".
void save_model(const FittedModel& model, const std::filesystem::path& dir);
FittedModel load_model(const std::filesystem::path& dir);

}  // namespace meslstm
