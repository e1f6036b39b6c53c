#include "meslstm/error.hpp"
#include "meslstm/metrics.hpp"
#include "meslstm/pipeline.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace meslstm;
using testing_support::seasonal_frame;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.lstm_size = 6;
    c.epochs = 3;
    c.batch_size = 16;
    c.window = 7;
    c.mc_samples = 40;
    c.seed = 3;
    return c;
}

struct Fixture {
    Partitions parts;
    FittedModel model;
};

Fixture small_fit(const ModelConfig& cfg = small_config()) {
    Fixture f;
    f.parts = split(seasonal_frame(160, 3, 0.01, 1), SplitSpec{}, cfg.window);
    f.model = fit(f.parts.train, f.parts.validation, cfg);
    return f;
}

}  // namespace

TEST(Fit, RecordsHistoryAndDiagnostics) {
    const auto f = small_fit();
    EXPECT_TRUE(f.model.trained);
    EXPECT_EQ(f.model.history.size(), f.parts.train.length());
    EXPECT_EQ(f.model.diagnostics.size(), 3u);
    EXPECT_EQ(f.model.last_day(), f.parts.train.days().back());
    for (const auto& d : f.model.diagnostics) {
        EXPECT_TRUE(std::isfinite(d.point_train));
        EXPECT_TRUE(std::isfinite(d.variational_train));
    }
}

TEST(Fit, ZeroEpochsRejected) {
    auto cfg = small_config();
    cfg.epochs = 0;
    const auto parts = split(seasonal_frame(160, 3, 0.01, 1), SplitSpec{}, 7);
    EXPECT_THROW(fit(parts.train, parts.validation, cfg), ContractError);
}

TEST(Fit, NonContiguousValidationRejected) {
    const auto parts = split(seasonal_frame(160, 3, 0.01, 1), SplitSpec{}, 7);
    EXPECT_THROW(fit(parts.train, parts.test, small_config()), ContractError);
}

TEST(Fit, DivergenceNamesEpoch) {
    auto cfg = small_config();
    cfg.adam.learning_rate = 1e305;
    const auto parts = split(seasonal_frame(160, 3, 0.01, 1), SplitSpec{}, 7);
    try {
        fit(parts.train, parts.validation, cfg);
        FAIL() << "expected divergence";
    } catch (const TrainingDivergenceError& e) {
        EXPECT_GE(e.epoch(), 1);
    }
}

TEST(Fit, SameSeedSameSerialization) {
    const auto a = small_fit();
    const auto b = small_fit();
    EXPECT_EQ(model_to_json(a.model).dump(), model_to_json(b.model).dump());
    auto cfg = small_config();
    cfg.seed = 4;
    EXPECT_NE(model_to_json(small_fit(cfg).model).dump(), model_to_json(a.model).dump());
}

TEST(Predict, ShapesNestingAndDeterminism) {
    const auto f = small_fit();
    const auto model = extend(f.model, f.parts.validation);
    const auto ctx = f.parts.validation.tail(7);
    const auto r = predict(model, ctx, 11);
    EXPECT_EQ(r.point.rows(), 1);
    EXPECT_EQ(r.point.cols(), 7);
    ASSERT_EQ(r.intervals.size(), 3u);
    EXPECT_EQ(r.days.front(), ctx.days().back() + 1);
    EXPECT_EQ(r.distribution.size(), 40u);
    const auto& wide = r.intervals[0];
    const auto& narrow = r.intervals[2];
    EXPECT_TRUE((wide.lower.array() <= narrow.lower.array()).all());
    EXPECT_TRUE((narrow.upper.array() <= wide.upper.array()).all());
    const auto again = predict(model, ctx, 11);
    EXPECT_EQ(again.point, r.point);
    EXPECT_EQ(again.intervals[0].lower, r.intervals[0].lower);
}

TEST(Predict, ContextNewerThanModelIsAbsorbed) {
    const auto f = small_fit();
    const auto ctx = f.parts.validation.slice(0, 7);
    const auto direct = predict(extend(f.model, ctx), ctx, 5);
    const auto rolled = predict(f.model, ctx, 5);
    EXPECT_EQ(direct.point, rolled.point);
}

TEST(Predict, ErrorsOnBadContext) {
    const auto f = small_fit();
    EXPECT_THROW(predict(f.model, f.parts.train.tail(6), 1), ContractError);
    const auto& t = f.parts.train.tail(7);
    std::vector<std::string> names = t.column_names();
    names[2] = "other";
    const SeriesFrame renamed(t.days(), t.values(), names, t.predictand_indices());
    EXPECT_THROW(predict(f.model, renamed, 1), ContractError);
    EXPECT_THROW(sample_forecasts(f.model, t, 1, 1), ContractError);
    FittedModel untrained;
    EXPECT_THROW(point_raw(untrained, t), Error);
}

TEST(Predict, DegenerateHeadCollapsesIntervals) {
    auto f = small_fit();
    f.model.variational.head.weight_rho.setConstant(-1000.0);
    f.model.variational.head.bias_rho.setConstant(-1000.0);
    const auto r = predict(f.model, f.parts.train.tail(7), 2);
    for (const auto& iv : r.intervals) EXPECT_EQ(iv.lower, iv.upper);
    for (const auto& s : r.distribution.samples) EXPECT_EQ(s, r.distribution.samples.front());
}

TEST(Predict, ZeroNetworkOutputGivesLevelPlusSeasonal) {
    auto cfg = small_config();
    cfg.seasonality = SeasonalityOverride::Additive;
    auto f = small_fit(cfg);
    f.model.point.head.weights.setZero();
    f.model.point.head.bias.setZero();
    f.model.target_scaler.mean.setZero();
    const auto r = predict(f.model, f.parts.train.tail(7), 2);
    const auto& st = f.model.history.back();
    const auto& cs = st.covariates[0];
    for (std::size_t h = 1; h <= 7; ++h) {
        EXPECT_NEAR(r.point(0, static_cast<Eigen::Index>(h - 1)), cs.level + st.seasonal_ahead(0, h), 1e-9);
    }
}

TEST(Persistence, SaveLoadGivesBitwiseIdenticalPredictions) {
    const auto f = small_fit();
    const auto dir = testing_support::scratch_dir("model");
    save_model(f.model, dir);
    for (const char* name : {"config.json", "smoothing.json", "history.json", "params.json"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
    }
    const auto loaded = load_model(dir);
    const auto ctx = f.parts.train.tail(7);
    const auto a = predict(f.model, ctx, 9);
    const auto b = predict(loaded, ctx, 9);
    EXPECT_EQ(a.point, b.point);
    for (std::size_t i = 0; i < a.intervals.size(); ++i) {
        EXPECT_EQ(a.intervals[i].lower, b.intervals[i].lower);
        EXPECT_EQ(a.intervals[i].upper, b.intervals[i].upper);
    }
    EXPECT_EQ(model_to_json(loaded).dump(), model_to_json(f.model).dump());
}

TEST(Segment, ScoresEachBlock) {
    const auto f = small_fit();
    const auto model = extend(f.model, f.parts.validation);
    const auto prior = f.parts.train.concat(f.parts.validation);
    const auto seg = forecast_segment(model, prior, f.parts.test, 6);
    EXPECT_EQ(seg.point.cols(), static_cast<Eigen::Index>(f.parts.test.length()));
    EXPECT_EQ(seg.actual, f.parts.test.predictand_values());
    // First block equals a direct prediction from the same context.
    const auto direct = predict(model, prior.tail(7), derive_seed(6, 0));
    EXPECT_EQ(Eigen::MatrixXd(seg.point.leftCols(7)), direct.point);
    EXPECT_THROW(forecast_segment(f.model, prior, f.parts.test, 6), ContractError);
}

TEST(Pipeline, ExactLevelPlusSeasonMatchesPureEs) {
    // No residual at all: the smoothing layer explains everything and the
    // network only has to learn to output about zero.
    const auto frame = seasonal_frame(300, 3, 0.0, 1);
    ModelConfig cfg;
    cfg.seed = 1;
    cfg.mc_samples = 20;
    const auto parts = split(frame, SplitSpec{}, cfg.window);
    const auto model = extend(fit(parts.train, parts.validation, cfg), parts.validation);
    const auto ctx = parts.validation.tail(cfg.window);
    const auto r = predict(model, ctx, 1);
    const Eigen::MatrixXd es = pure_es_forecast(model.history.back(), cfg.window).topRows(1);
    const Eigen::VectorXd a = es.row(0).transpose(), p = r.point.row(0).transpose();
    EXPECT_LT(smape(std::span<const double>(a.data(), 14), std::span<const double>(p.data(), 14)), 0.02);
    const Eigen::VectorXd act = parts.test.predictand_values().row(0).head(14).transpose();
    EXPECT_LT(smape(std::span<const double>(act.data(), 14), std::span<const double>(p.data(), 14)), 0.02);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
    auto c = small_config();
    c.output_activation = Activation::ReLU;
    c.alphas = {0.01, 0.05};
    c.smoothing.alpha = 0.45;
    const auto back = config_from_json(nlohmann::ordered_json::parse(config_to_json(c).dump()));
    EXPECT_EQ(config_to_json(back).dump(), config_to_json(c).dump());
    EXPECT_THROW(config_from_json(nlohmann::ordered_json{{"lstm_sizes", 5}}), ContractError);
    EXPECT_THROW(config_from_json(nlohmann::ordered_json{{"smoothing", {{"beta", 1}}}}), ContractError);
}

TEST(Grid, FullSearchSpace) {
    const auto g = GridSpec::full();
    EXPECT_EQ(g.lstm_sizes.size(), 21u);
    EXPECT_EQ(g.epochs.size(), 13u);
    EXPECT_EQ(g.batch_sizes.size(), 8u);
    EXPECT_EQ(g.windows, (std::vector<std::size_t>{7, 14, 21}));
    EXPECT_EQ(g.expand().size(), 21u * 13 * 8 * 3);
}

TEST(Grid, ParsimonyRule) {
    std::vector<GridEntry> e(2);
    e[0].config.lstm_size = 100;
    e[0].parameters = network_parameter_count(10, 2, 100, 14);
    e[1].config.lstm_size = 50;
    e[1].parameters = network_parameter_count(10, 2, 50, 14);
    e[0].validation_smape = e[1].validation_smape = 0.1;
    EXPECT_EQ(select_parsimonious(e), 1u);

    // Only the five best are eligible, however small the sixth.
    std::vector<GridEntry> f(6);
    for (std::size_t i = 0; i < 6; ++i) {
        f[i].validation_smape = 0.1 * static_cast<double>(i + 1);
        f[i].parameters = 100 - i;
        f[i].config.lstm_size = 60;
    }
    EXPECT_EQ(select_parsimonious(f), 4u);
    f[4].error = "boom";
    EXPECT_EQ(select_parsimonious(f), 5u);

    // Equal parameters: smaller S, then fewer epochs.
    std::vector<GridEntry> t(2);
    t[0].parameters = t[1].parameters = 10;
    t[0].config.epochs = 30;
    t[1].config.epochs = 20;
    EXPECT_EQ(select_parsimonious(t), 1u);
}

TEST(Grid, SingleConfigIsReturned) {
    const auto parts = split(seasonal_frame(160, 2, 0.01, 2), SplitSpec{}, 7);
    GridSpec g;
    g.base = small_config();
    g.lstm_sizes = {5};
    g.epochs = {2};
    g.batch_sizes = {8};
    g.windows = {7};
    const auto out = grid_search(parts.train, parts.validation, g, 1);
    ASSERT_EQ(out.entries.size(), 1u);
    EXPECT_TRUE(out.entries[0].error.empty()) << out.entries[0].error;
    EXPECT_EQ(out.best.lstm_size, 5u);
    EXPECT_EQ(out.best.epochs, 2u);
    EXPECT_THROW(grid_search(parts.train, parts.validation, GridSpec{}, 1), ContractError);
}

TEST(Grid, ParallelMatchesSerial) {
    const auto parts = split(seasonal_frame(160, 2, 0.01, 2), SplitSpec{}, 7);
    GridSpec g;
    g.base = small_config();
    g.lstm_sizes = {4, 6};
    g.epochs = {2};
    g.batch_sizes = {8, 16};
    g.windows = {7};
    const auto serial = grid_search(parts.train, parts.validation, g, 1);
    const auto parallel = grid_search(parts.train, parts.validation, g, 3);
    for (std::size_t i = 0; i < serial.entries.size(); ++i) {
        EXPECT_EQ(serial.entries[i].validation_smape, parallel.entries[i].validation_smape);
    }
    EXPECT_EQ(config_to_json(serial.best).dump(), config_to_json(parallel.best).dump());
}
