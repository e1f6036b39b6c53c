#include "meslstm/pipeline.hpp"

#include "meslstm/error.hpp"
#include "meslstm/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

namespace meslstm {

std::string to_string(SeasonalityOverride s) {
    switch (s) {
        case SeasonalityOverride::Auto: return "auto";
        case SeasonalityOverride::Additive: return "additive";
        case SeasonalityOverride::Multiplicative: return "multiplicative";
    }
    return "auto";
}

SeasonalityOverride seasonality_override_from_string(const std::string& name) {
    if (name == "auto") return SeasonalityOverride::Auto;
    if (name == "additive") return SeasonalityOverride::Additive;
    if (name == "multiplicative") return SeasonalityOverride::Multiplicative;
    throw ContractError("unknown seasonality setting '" + name + "'");
}

void ModelConfig::validate() const {
    if (lstm_size == 0) throw ContractError("config: lstm_size must be positive");
    if (epochs == 0) throw ContractError("config: epochs must be positive");
    if (batch_size == 0) throw ContractError("config: batch_size must be positive");
    if (window == 0) throw ContractError("config: window must be positive");
    if (stride == 0) throw ContractError("config: stride must be positive");
    if (mc_samples < 2) throw ContractError("config: mc_samples must be at least 2");
    if (!(initial_sigma > 0.0)) throw ContractError("config: initial_sigma must be positive");
    if (!(kl_scale >= 0.0)) throw ContractError("config: kl_scale must be non-negative");
    if (!(adam.learning_rate > 0.0)) throw ContractError("config: learning_rate must be positive");
    for (double a : alphas) {
        if (!(a > 0.0 && a < 1.0)) throw ContractError("config: significance levels must lie in (0,1)");
    }
    smoothing.validate();
}

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
    return {{"lstm_size", c.lstm_size},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"window", c.window},
            {"stride", c.stride},
            {"smoothing",
             {{"alpha", c.smoothing.alpha},
              {"gamma", c.smoothing.gamma},
              {"delta", c.smoothing.delta},
              {"period", c.smoothing.period},
              {"freeze_trend_in_seasonal", c.smoothing.freeze_trend_in_seasonal}}},
            {"seasonality", to_string(c.seasonality)},
            {"mc_samples", c.mc_samples},
            {"alphas", c.alphas},
            {"seed", c.seed},
            {"learning_rate", c.adam.learning_rate},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"epsilon", c.adam.epsilon},
            {"clip_norm", c.clip_norm},
            {"output_activation", c.output_activation == Activation::ReLU ? "relu" : "identity"},
            {"initial_sigma", c.initial_sigma},
            {"stochastic_bias", c.stochastic_bias},
            {"kl_scale", c.kl_scale}};
}

ModelConfig config_from_json(const nlohmann::ordered_json& j, ModelConfig c) {
    for (const auto& [key, v] : j.items()) {
        if (key == "lstm_size") c.lstm_size = v.get<std::size_t>();
        else if (key == "epochs") c.epochs = v.get<std::size_t>();
        else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
        else if (key == "window") c.window = v.get<std::size_t>();
        else if (key == "stride") c.stride = v.get<std::size_t>();
        else if (key == "smoothing") {
            for (const auto& [sk, sv] : v.items()) {
                if (sk == "alpha") c.smoothing.alpha = sv.get<double>();
                else if (sk == "gamma") c.smoothing.gamma = sv.get<double>();
                else if (sk == "delta") c.smoothing.delta = sv.get<double>();
                else if (sk == "period") c.smoothing.period = sv.get<std::size_t>();
                else if (sk == "freeze_trend_in_seasonal") c.smoothing.freeze_trend_in_seasonal = sv.get<bool>();
                else throw ContractError("config: unknown smoothing key '" + sk + "'");
            }
        } else if (key == "seasonality") c.seasonality = seasonality_override_from_string(v.get<std::string>());
        else if (key == "mc_samples") c.mc_samples = v.get<std::size_t>();
        else if (key == "alphas") c.alphas = v.get<std::vector<double>>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "learning_rate") c.adam.learning_rate = v.get<double>();
        else if (key == "beta1") c.adam.beta1 = v.get<double>();
        else if (key == "beta2") c.adam.beta2 = v.get<double>();
        else if (key == "epsilon") c.adam.epsilon = v.get<double>();
        else if (key == "clip_norm") c.clip_norm = v.get<double>();
        else if (key == "output_activation") {
            const auto a = v.get<std::string>();
            if (a != "relu" && a != "identity") throw ContractError("config: output_activation must be relu or identity");
            c.output_activation = a == "relu" ? Activation::ReLU : Activation::Identity;
        } else if (key == "initial_sigma") c.initial_sigma = v.get<double>();
        else if (key == "kl_scale") c.kl_scale = v.get<double>();
        else if (key == "stochastic_bias") c.stochastic_bias = v.get<bool>();
        else throw ContractError("config: unknown key '" + key + "'");
    }
    return c;
}

namespace {

/// Scaled inputs (k x m each) and flattened scaled targets ((j*m) x N,
/// column-major j x m per window).
struct TrainingSet {
    std::vector<Matrix> inputs;
    Matrix targets;

    std::size_t size() const noexcept { return inputs.size(); }
};

Matrix scale_rows(const Matrix& x, const AffineScaler& s) {
    return ((x.colwise() - s.mean).array().colwise() / s.scale.array()).matrix();
}

Matrix unscale_rows(const Matrix& z, const AffineScaler& s) {
    return ((z.array().colwise() * s.scale.array()).matrix().colwise() + s.mean);
}

AffineScaler fit_scaler(const Matrix& rows_by_samples) {
    AffineScaler s;
    const auto n = static_cast<double>(rows_by_samples.cols());
    s.mean = rows_by_samples.rowwise().mean();
    s.scale = ((rows_by_samples.colwise() - s.mean).rowwise().squaredNorm() / n).cwiseSqrt();
    for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
        if (!(s.scale(i) > 1e-12) || !std::isfinite(s.scale(i))) s.scale(i) = 1.0;
    }
    return s;
}

Matrix flatten(const Matrix& jm) { return Eigen::Map<const Matrix>(jm.data(), jm.size(), 1); }

Matrix unflatten(const Matrix& col, Eigen::Index j, Eigen::Index m) { return Eigen::Map<const Matrix>(col.data(), j, m); }

/// Raw (unscaled) windows over a block of rows with one snapshot per row.
struct RawWindows {
    std::vector<Matrix> inputs;   // deseasonalized k x m
    std::vector<Matrix> targets;  // raw-space j x m
};

RawWindows raw_windows(const Matrix& values, std::span<const SmoothingState> states,
                       std::span<const std::size_t> predictands, std::size_t window, std::size_t stride,
                       std::size_t first_origin) {
    const Matrix des = deseasonalize_block(values, states);
    const std::size_t len = static_cast<std::size_t>(values.cols());
    const auto m = static_cast<Eigen::Index>(window);
    RawWindows out;
    for (std::size_t o = first_origin; o + 2 * window <= len; o += stride) {
        const auto oi = static_cast<Eigen::Index>(o);
        Matrix actual(static_cast<Eigen::Index>(predictands.size()), m);
        for (std::size_t r = 0; r < predictands.size(); ++r) {
            actual.row(static_cast<Eigen::Index>(r)) =
                values.row(static_cast<Eigen::Index>(predictands[r])).segment(oi + m, m);
        }
        out.inputs.emplace_back(des.middleCols(oi, m));
        out.targets.push_back(raw_targets(actual, states[o + window - 1], predictands));
    }
    return out;
}

TrainingSet scaled_set(const RawWindows& raw, const AffineScaler& in_scale, const AffineScaler& out_scale) {
    TrainingSet set;
    set.inputs.reserve(raw.inputs.size());
    for (const Matrix& x : raw.inputs) set.inputs.push_back(scale_rows(x, in_scale));
    if (raw.targets.empty()) return set;
    const Eigen::Index jm = raw.targets.front().size();
    set.targets.resize(jm, static_cast<Eigen::Index>(raw.targets.size()));
    for (std::size_t w = 0; w < raw.targets.size(); ++w) {
        set.targets.col(static_cast<Eigen::Index>(w)) = flatten(scale_rows(raw.targets[w], out_scale));
    }
    return set;
}

std::vector<Matrix> gather_inputs(const TrainingSet& set, std::span<const std::size_t> idx) {
    std::vector<Matrix> seqs;
    seqs.reserve(idx.size());
    for (std::size_t i : idx) seqs.push_back(set.inputs[i]);
    return pack_sequences(seqs);
}

Matrix gather_targets(const TrainingSet& set, std::span<const std::size_t> idx) {
    Matrix t(set.targets.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t b = 0; b < idx.size(); ++b) t.col(static_cast<Eigen::Index>(b)) = set.targets.col(static_cast<Eigen::Index>(idx[b]));
    return t;
}

std::vector<Matrix> last_step_gradient(const Matrix& dh_last, std::size_t steps) {
    std::vector<Matrix> dh(steps, Matrix::Zero(dh_last.rows(), dh_last.cols()));
    dh.back() = dh_last;
    return dh;
}

FlipoutNoise mean_path_noise(const FlipoutDense& layer, Eigen::Index batch) {
    const auto out = static_cast<Eigen::Index>(layer.out_size());
    const auto in = static_cast<Eigen::Index>(layer.in_size());
    return {Matrix::Zero(out, in), Matrix::Ones(in, batch), Matrix::Ones(out, batch), Matrix::Zero(out, 1)};
}

void check_loss(double loss, std::size_t epoch, const char* head) {
    if (!std::isfinite(loss)) {
        throw TrainingDivergenceError(static_cast<int>(epoch + 1),
                                      std::string("training diverged: non-finite ") + head + " loss at epoch " +
                                          std::to_string(epoch + 1));
    }
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

double point_loss(const PointNetwork& net, const TrainingSet& set) {
    if (set.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    const auto idx = all_indices(set.size());
    LstmCache cache;
    const auto hs = lstm_forward(net.lstm, gather_inputs(set, idx), cache);
    return mae_loss(dense_forward(net.head, hs.back()), set.targets).value;
}

double variational_mean_loss(const VariationalNetwork& net, const TrainingSet& set) {
    if (set.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    const auto idx = all_indices(set.size());
    LstmCache cache;
    const auto hs = lstm_forward(net.lstm, gather_inputs(set, idx), cache);
    const Matrix out = flipout_forward(net.head, hs.back(), mean_path_noise(net.head, hs.back().cols()));
    return mae_loss(out, set.targets).value;
}

void train_point(PointNetwork& net, const TrainingSet& train, const TrainingSet& val, const ModelConfig& cfg,
                 std::vector<EpochDiagnostics>& diag) {
    AdamState adam{cfg.adam, 0, {}, {}};
    std::mt19937_64 shuffler(derive_seed(cfg.seed, 0, "point-shuffle"));
    auto order = all_indices(train.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffler);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            LstmCache cache;
            const auto hs = lstm_forward(net.lstm, gather_inputs(train, idx), cache);
            DenseCache dcache;
            const Matrix out = dense_forward(net.head, hs.back(), &dcache);
            const LossResult loss = mae_loss(out, gather_targets(train, idx));
            check_loss(loss.value, epoch, "point");
            DenseGrads dg = dense_backward(net.head, dcache, loss.gradient);
            LstmGrads lg = lstm_backward(net.lstm, cache, last_step_gradient(dg.dx, cache.steps()));
            Matrix* grads[] = {&lg.dW, &lg.dU, &lg.db, &dg.dW, &dg.db};
            if (cfg.clip_norm > 0.0) clip_global_norm(grads, cfg.clip_norm);
            Matrix* params[] = {&net.lstm.W, &net.lstm.U, &net.lstm.b, &net.head.weights, &net.head.bias};
            const Matrix* cgrads[] = {grads[0], grads[1], grads[2], grads[3], grads[4]};
            adam_step(adam, params, cgrads);
            total += loss.value * static_cast<double>(idx.size());
        }
        diag[epoch].point_train = total / static_cast<double>(train.size());
        diag[epoch].point_validation = point_loss(net, val);
        check_loss(diag[epoch].point_train, epoch, "point");
    }
}

void train_variational(VariationalNetwork& net, const TrainingSet& train, const TrainingSet& val,
                       const ModelConfig& cfg, std::vector<EpochDiagnostics>& diag) {
    AdamState adam{cfg.adam, 0, {}, {}};
    std::mt19937_64 shuffler(derive_seed(cfg.seed, 0, "variational-shuffle"));
    Rng noise_rng(derive_seed(cfg.seed, 0, "flipout-train"));
    const double kl_weight = cfg.kl_scale / static_cast<double>(train.size());
    auto order = all_indices(train.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffler);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            LstmCache cache;
            const auto hs = lstm_forward(net.lstm, gather_inputs(train, idx), cache);
            FlipoutCache fcache;
            const FlipoutNoise noise = draw_flipout_noise(net.head, hs.back().cols(), noise_rng);
            const Matrix out = flipout_forward(net.head, hs.back(), noise, &fcache);
            const LossResult loss = mae_loss(out, gather_targets(train, idx));
            const double objective = loss.value + kl_weight * kl_term(net.head);
            check_loss(objective, epoch, "variational");
            FlipoutGrads fg = flipout_backward(net.head, fcache, loss.gradient);
            add_kl_gradient(net.head, kl_weight, fg);
            LstmGrads lg = lstm_backward(net.lstm, cache, last_step_gradient(fg.dx, cache.steps()));
            std::vector<Matrix*> grads{&lg.dW, &lg.dU, &lg.db, &fg.d_weight_mean, &fg.d_weight_rho, &fg.d_bias_mean};
            std::vector<Matrix*> params{&net.lstm.W, &net.lstm.U, &net.lstm.b, &net.head.weight_mean,
                                        &net.head.weight_rho, &net.head.bias_mean};
            if (net.head.stochastic_bias) {
                grads.push_back(&fg.d_bias_rho);
                params.push_back(&net.head.bias_rho);
            }
            if (cfg.clip_norm > 0.0) clip_global_norm(grads, cfg.clip_norm);
            const std::vector<const Matrix*> cgrads(grads.begin(), grads.end());
            adam_step(adam, params, cgrads);
            total += objective * static_cast<double>(idx.size());
        }
        diag[epoch].variational_train = total / static_cast<double>(train.size());
        diag[epoch].variational_validation = variational_mean_loss(net, val);
    }
}

std::vector<SeasonalityKind> choose_kinds(const SeriesFrame& train, const ModelConfig& cfg) {
    switch (cfg.seasonality) {
        case SeasonalityOverride::Additive: return std::vector(train.covariates(), SeasonalityKind::Additive);
        case SeasonalityOverride::Multiplicative:
            return std::vector(train.covariates(), SeasonalityKind::Multiplicative);
        case SeasonalityOverride::Auto: break;
    }
    return select_kind(train, cfg.smoothing).kinds;
}

std::size_t history_index(const FittedModel& model, std::int64_t day) {
    const std::int64_t first = model.history.days.front();
    if (day < first || day > model.last_day()) {
        throw ContractError("context extends outside the model's absorbed history");
    }
    return static_cast<std::size_t>(day - first);
}

void check_schema(const FittedModel& model, const SeriesFrame& frame) {
    if (frame.column_names() != model.column_names || frame.predictand_indices() != model.predictand_indices) {
        throw ContractError("frame columns do not match the model's training schema");
    }
}

/// Scaled k x m input for a context lying inside the history, plus the state
/// at the context's last row.
std::pair<Matrix, const SmoothingState*> context_input(const FittedModel& model, const SeriesFrame& context) {
    if (!model.trained) throw ContractError("model is not trained");
    check_schema(model, context);
    if (context.length() != model.window()) {
        throw ContractError("context length " + std::to_string(context.length()) + " differs from window " +
                            std::to_string(model.window()));
    }
    const std::size_t first = history_index(model, context.days().front());
    const std::size_t last = history_index(model, context.days().back());
    const std::span<const SmoothingState> states(model.history.states.data() + first, last - first + 1);
    const Matrix des = deseasonalize_block(context.values(), states);
    return {scale_rows(des, model.input_scaler), &model.history.states[last]};
}

Matrix raw_from_network(const FittedModel& model, const Matrix& net_out) {
    const auto j = static_cast<Eigen::Index>(model.predictands());
    const auto m = static_cast<Eigen::Index>(model.window());
    return unscale_rows(unflatten(net_out, j, m), model.target_scaler);
}

/// The model to forecast from: `model` itself or a copy rolled through the
/// context rows it has not seen yet.
FittedModel with_context(const FittedModel& model, const SeriesFrame& context) {
    const std::int64_t last = model.last_day();
    if (context.days().back() <= last) return model;
    const std::int64_t first_new = std::max(context.days().front(), last + 1);
    if (first_new != last + 1) throw ContractError("context is not contiguous with the model's history");
    const auto offset = static_cast<std::size_t>(first_new - context.days().front());
    return extend(model, context.slice(offset, context.length()));
}

nlohmann::ordered_json scaler_to_json(const AffineScaler& s) {
    return {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
            {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
}

AffineScaler scaler_from_json(const nlohmann::ordered_json& j) {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto scale = j.at("scale").get<std::vector<double>>();
    if (mean.size() != scale.size()) throw ContractError("scaler: mean/scale size mismatch");
    return {Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())),
            Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()))};
}

nlohmann::ordered_json history_to_json(const StateHistory& h) {
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& st : h.states) {
        steps.push_back(st.steps);
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (const auto& cs : st.covariates) {
            row.push_back({cs.level, cs.trend, cs.initial_trend, cs.seasonal});
        }
        rows.push_back(std::move(row));
    }
    return {{"format_version", 1}, {"days", h.days}, {"steps", steps}, {"states", rows}};
}

StateHistory history_from_json(const nlohmann::ordered_json& j, const SmoothingParams& params,
                               const std::vector<SeasonalityKind>& kinds) {
    if (j.at("format_version").get<int>() != 1) throw ContractError("history: unsupported format version");
    StateHistory h;
    h.days = j.at("days").get<std::vector<std::int64_t>>();
    const auto steps = j.at("steps").get<std::vector<std::size_t>>();
    const auto& rows = j.at("states");
    if (steps.size() != h.days.size() || rows.size() != h.days.size()) throw ContractError("history: length mismatch");
    h.states.reserve(rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
        SmoothingState st;
        st.params = params;
        st.steps = steps[t];
        const auto& row = rows[t];
        if (row.size() != kinds.size()) throw ContractError("history: covariate count mismatch");
        for (std::size_t c = 0; c < row.size(); ++c) {
            CovariateState cs;
            cs.kind = kinds[c];
            cs.level = row[c][0].get<double>();
            cs.trend = row[c][1].get<double>();
            cs.initial_trend = row[c][2].get<double>();
            cs.seasonal = row[c][3].get<std::vector<double>>();
            st.covariates.push_back(std::move(cs));
        }
        h.states.push_back(std::move(st));
    }
    return h;
}

}  // namespace

FittedModel fit(const SeriesFrame& train, const SeriesFrame& validation, const ModelConfig& config) {
    config.validate();
    if (!train.same_schema(validation)) throw ContractError("fit: train and validation schemas differ");
    if (validation.length() > 0 && validation.days().front() != train.days().back() + 1) {
        throw ContractError("fit: validation must follow the training frame directly");
    }
    const std::size_t m = config.window;
    if (train.length() < 2 * m) {
        throw InsufficientDataError("fit: training frame shorter than two windows");
    }

    FittedModel model;
    model.config = config;
    model.column_names = train.column_names();
    model.predictand_indices = train.predictand_indices();
    model.kinds = choose_kinds(train, config);
    model.history = run_history(initialize(train, config.smoothing, model.kinds), train);
    model.training_length = train.length();

    const auto& preds = model.predictand_indices;
    const RawWindows raw_train = raw_windows(train.values(), model.history.states, preds, m, config.stride, 0);
    if (raw_train.inputs.empty()) throw InsufficientDataError("fit: no training windows");

    // Validation windows: targets inside the validation frame, inputs may
    // reach back into the last m training rows.
    RawWindows raw_val;
    if (validation.length() >= m) {
        const StateHistory val_hist = run_history(model.history.back(), validation);
        const SeriesFrame joined = train.tail(m).concat(validation);
        std::vector<SmoothingState> states(model.history.states.end() - static_cast<std::ptrdiff_t>(m),
                                           model.history.states.end());
        states.insert(states.end(), val_hist.states.begin(), val_hist.states.end());
        raw_val = raw_windows(joined.values(), states, preds, m, 1, 0);
    }

    Matrix all_inputs(static_cast<Eigen::Index>(train.covariates()),
                      static_cast<Eigen::Index>(raw_train.inputs.size() * m));
    Matrix all_targets(static_cast<Eigen::Index>(preds.size()),
                       static_cast<Eigen::Index>(raw_train.targets.size() * m));
    for (std::size_t w = 0; w < raw_train.inputs.size(); ++w) {
        all_inputs.middleCols(static_cast<Eigen::Index>(w * m), static_cast<Eigen::Index>(m)) = raw_train.inputs[w];
        all_targets.middleCols(static_cast<Eigen::Index>(w * m), static_cast<Eigen::Index>(m)) = raw_train.targets[w];
    }
    model.input_scaler = fit_scaler(all_inputs);
    model.target_scaler = fit_scaler(all_targets);

    const TrainingSet train_set = scaled_set(raw_train, model.input_scaler, model.target_scaler);
    const TrainingSet val_set = scaled_set(raw_val, model.input_scaler, model.target_scaler);
    model.training_examples = train_set.size();

    const std::size_t k = train.covariates();
    const std::size_t out = preds.size() * m;
    {
        Rng rng(derive_seed(config.seed, 0, "point-init"));
        model.point.lstm = LstmLayer::initialized(k, config.lstm_size, rng);
        model.point.head = DenseLayer::initialized(config.lstm_size, out, config.output_activation, rng);
    }
    {
        Rng rng(derive_seed(config.seed, 0, "variational-init"));
        model.variational.lstm = LstmLayer::initialized(k, config.lstm_size, rng);
        model.variational.head = FlipoutDense::initialized(config.lstm_size, out, rng, config.initial_sigma);
        model.variational.head.stochastic_bias = config.stochastic_bias;
    }

    model.diagnostics.assign(config.epochs, EpochDiagnostics{});
    train_point(model.point, train_set, val_set, config, model.diagnostics);
    train_variational(model.variational, train_set, val_set, config, model.diagnostics);
    model.trained = true;
    return model;
}

FittedModel extend(FittedModel model, const SeriesFrame& later) {
    check_schema(model, later);
    if (later.length() == 0) return model;
    if (later.days().front() != model.last_day() + 1) {
        throw ContractError("extend: new rows must start the day after the model's last absorbed day");
    }
    SmoothingState state = model.history.back();
    for (std::size_t t = 0; t < later.length(); ++t) {
        state.absorb(later.values().col(static_cast<Eigen::Index>(t)));
        model.history.days.push_back(later.days()[t]);
        model.history.states.push_back(state);
    }
    return model;
}

Eigen::MatrixXd point_raw(const FittedModel& model, const SeriesFrame& context) {
    const auto [input, origin] = context_input(model, context);
    (void)origin;
    LstmCache cache;
    const Matrix h = lstm_forward(model.point.lstm, input, cache);
    return raw_from_network(model, dense_forward(model.point.head, h.rightCols(1)));
}

ForecastDistribution sample_forecasts(const FittedModel& model, const SeriesFrame& context, std::size_t n_samples,
                                      std::uint64_t seed) {
    if (n_samples < 2) throw ContractError("sample_forecasts: at least two Monte-Carlo samples required");
    const auto [input, origin] = context_input(model, context);
    LstmCache cache;
    const Matrix h = lstm_forward(model.variational.lstm, input, cache);
    const SmoothingState& state = *origin;
    auto post = [&](const Matrix& raw) {
        return reseasonalize(raw_from_network(model, raw), state, model.predictand_indices);
    };
    ForecastDistribution dist = sample_head(model.variational.head, h.rightCols(1), n_samples, seed, post);
    dist.alphas = model.config.alphas;
    return dist;
}

ForecastResult predict(const FittedModel& model, const SeriesFrame& context, std::uint64_t seed) {
    const FittedModel current = with_context(model, context);
    const auto [input, origin] = context_input(current, context);
    (void)input;
    ForecastResult res;
    res.point = reseasonalize(point_raw(current, context), *origin, current.predictand_indices);
    res.distribution = sample_forecasts(current, context, current.config.mc_samples, seed);
    for (double a : current.config.alphas) res.intervals.push_back(extract_interval(res.distribution, a));
    for (std::size_t h = 1; h <= current.window(); ++h) {
        res.days.push_back(context.days().back() + static_cast<std::int64_t>(h));
    }
    return res;
}

ForecastResult predict(const FittedModel& model, const SeriesFrame& context) {
    return predict(model, context, derive_seed(model.config.seed, 0, "predict"));
}

SegmentForecast forecast_segment(const FittedModel& model, const SeriesFrame& prior, const SeriesFrame& segment,
                                 std::uint64_t seed) {
    const std::size_t m = model.window();
    if (prior.length() < m) throw InsufficientDataError("forecast_segment: prior shorter than one window");
    if (model.last_day() != prior.days().back()) {
        throw ContractError("forecast_segment: model must have absorbed exactly the prior rows");
    }
    const SeriesFrame joined = prior.tail(m).concat(segment);
    const auto j = static_cast<Eigen::Index>(model.predictands());
    const auto n = static_cast<Eigen::Index>(segment.length());

    SegmentForecast out;
    out.days = segment.days();
    out.actual = segment.predictand_values();
    out.point.resize(j, n);
    for (double a : model.config.alphas) out.intervals.push_back({a, Matrix(j, n), Matrix(j, n)});

    FittedModel current = model;
    std::size_t block = 0;
    for (std::size_t o = 0; o < segment.length(); o += m, ++block) {
        const std::size_t h = std::min(m, segment.length() - o);
        const ForecastResult res = predict(current, joined.slice(o, o + m), derive_seed(seed, block));
        const auto oi = static_cast<Eigen::Index>(o);
        const auto hi = static_cast<Eigen::Index>(h);
        out.point.middleCols(oi, hi) = res.point.leftCols(hi);
        for (std::size_t a = 0; a < res.intervals.size(); ++a) {
            out.intervals[a].lower.middleCols(oi, hi) = res.intervals[a].lower.leftCols(hi);
            out.intervals[a].upper.middleCols(oi, hi) = res.intervals[a].upper.leftCols(hi);
        }
        current = extend(std::move(current), segment.slice(o, o + h));
    }
    return out;
}

std::size_t network_parameter_count(std::size_t covariates, std::size_t predictands, std::size_t lstm_size,
                                    std::size_t window) {
    return 4 * lstm_size * (covariates + lstm_size + 1) + (lstm_size + 1) * predictands * window;
}

namespace {

std::vector<std::size_t> stepped(std::size_t lo, std::size_t hi, std::size_t step) {
    std::vector<std::size_t> v;
    for (std::size_t x = lo; x <= hi; x += step) v.push_back(x);
    return v;
}

}  // namespace

GridSpec GridSpec::full() {
    GridSpec g;
    g.lstm_sizes = stepped(50, 150, 5);
    g.epochs = stepped(15, 75, 5);
    g.batch_sizes = stepped(8, 64, 8);
    g.windows = {7, 14, 21};
    return g;
}

std::vector<ModelConfig> GridSpec::expand() const {
    std::vector<ModelConfig> out;
    for (std::size_t s : lstm_sizes) {
        for (std::size_t e : epochs) {
            for (std::size_t b : batch_sizes) {
                for (std::size_t w : windows) {
                    ModelConfig c = base;
                    c.lstm_size = s;
                    c.epochs = e;
                    c.batch_size = b;
                    c.window = w;
                    out.push_back(c);
                }
            }
        }
    }
    return out;
}

std::size_t select_parsimonious(const std::vector<GridEntry>& entries, std::size_t top) {
    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].error.empty() && std::isfinite(entries[i].validation_smape)) ok.push_back(i);
    }
    if (ok.empty()) throw ContractError("grid_search: no configuration could be evaluated");
    std::stable_sort(ok.begin(), ok.end(), [&](std::size_t a, std::size_t b) {
        return entries[a].validation_smape < entries[b].validation_smape;
    });
    ok.resize(std::min(top, ok.size()));
    return *std::min_element(ok.begin(), ok.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = entries[a];
        const auto& y = entries[b];
        if (x.parameters != y.parameters) return x.parameters < y.parameters;
        if (x.config.lstm_size != y.config.lstm_size) return x.config.lstm_size < y.config.lstm_size;
        return x.config.epochs < y.config.epochs;
    });
}

GridOutcome grid_search(const SeriesFrame& train, const SeriesFrame& validation, const GridSpec& grid,
                        std::size_t jobs) {
    const auto configs = grid.expand();
    if (configs.empty()) throw ContractError("grid_search: empty grid");
    GridOutcome outcome;
    outcome.entries.resize(configs.size());

    auto evaluate = [&](std::size_t i) {
        GridEntry& e = outcome.entries[i];
        e.config = configs[i];
        e.parameters = network_parameter_count(train.covariates(), train.predictand_count(), e.config.lstm_size,
                                               e.config.window);
        try {
            const FittedModel model = fit(train, validation, e.config);
            const SegmentForecast f =
                forecast_segment(model, train, validation, derive_seed(e.config.seed, 0, "grid-validation"));
            double total = 0.0;
            for (Eigen::Index r = 0; r < f.actual.rows(); ++r) {
                const Eigen::VectorXd a = f.actual.row(r).transpose();
                const Eigen::VectorXd p = f.point.row(r).transpose();
                total += smape(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                               std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
            }
            e.validation_smape = total / static_cast<double>(f.actual.rows());
        } catch (const Error& ex) {
            e.error = ex.what();
            e.validation_smape = std::numeric_limits<double>::infinity();
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, configs.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < configs.size(); ++i) evaluate(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < configs.size(); i = next++) evaluate(i);
            });
        }
        for (auto& t : pool) t.join();
    }
    outcome.best = outcome.entries[select_parsimonious(outcome.entries)].config;
    return outcome;
}

nlohmann::ordered_json model_to_json(const FittedModel& model) {
    nlohmann::ordered_json kinds = nlohmann::ordered_json::array();
    for (auto k : model.kinds) kinds.push_back(to_string(k));
    nlohmann::ordered_json diag = nlohmann::ordered_json::array();
    for (const auto& d : model.diagnostics) {
        diag.push_back({{"point_train", d.point_train},
                        {"point_validation", std::isfinite(d.point_validation) ? nlohmann::ordered_json(d.point_validation) : nlohmann::ordered_json(nullptr)},
                        {"variational_train", d.variational_train},
                        {"variational_validation", std::isfinite(d.variational_validation) ? nlohmann::ordered_json(d.variational_validation) : nlohmann::ordered_json(nullptr)}});
    }
    nlohmann::ordered_json params = {{"format_version", 1},
                                     {"column_names", model.column_names},
                                     {"predictand_indices", model.predictand_indices},
                                     {"kinds", kinds},
                                     {"training_length", model.training_length},
                                     {"training_examples", model.training_examples},
                                     {"trained", model.trained},
                                     {"input_scaler", scaler_to_json(model.input_scaler)},
                                     {"target_scaler", scaler_to_json(model.target_scaler)},
                                     {"point", {{"lstm", lstm_to_json(model.point.lstm)}, {"head", dense_to_json(model.point.head)}}},
                                     {"variational",
                                      {{"lstm", lstm_to_json(model.variational.lstm)},
                                       {"head", flipout_to_json(model.variational.head)}}},
                                     {"diagnostics", diag}};
    return {{"format_version", 1},
            {"config", config_to_json(model.config)},
            {"smoothing", state_to_json(model.history.back(), model.column_names)},
            {"history", history_to_json(model.history)},
            {"params", params}};
}

FittedModel model_from_json(const nlohmann::ordered_json& j) {
    if (j.at("format_version").get<int>() != 1) throw ContractError("model: unsupported format version");
    FittedModel model;
    model.config = config_from_json(j.at("config"));
    const auto& p = j.at("params");
    if (p.at("format_version").get<int>() != 1) throw ContractError("model params: unsupported format version");
    model.column_names = p.at("column_names").get<std::vector<std::string>>();
    model.predictand_indices = p.at("predictand_indices").get<std::vector<std::size_t>>();
    for (const auto& k : p.at("kinds")) model.kinds.push_back(seasonality_from_string(k.get<std::string>()));
    model.training_length = p.at("training_length").get<std::size_t>();
    model.training_examples = p.at("training_examples").get<std::size_t>();
    model.trained = p.at("trained").get<bool>();
    model.input_scaler = scaler_from_json(p.at("input_scaler"));
    model.target_scaler = scaler_from_json(p.at("target_scaler"));
    model.point.lstm = lstm_from_json(p.at("point").at("lstm"));
    model.point.head = dense_from_json(p.at("point").at("head"));
    model.variational.lstm = lstm_from_json(p.at("variational").at("lstm"));
    model.variational.head = flipout_from_json(p.at("variational").at("head"));
    auto num = [](const nlohmann::ordered_json& v) {
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    for (const auto& d : p.at("diagnostics")) {
        model.diagnostics.push_back({num(d.at("point_train")), num(d.at("point_validation")),
                                     num(d.at("variational_train")), num(d.at("variational_validation"))});
    }
    const SmoothingState final_state = state_from_json(j.at("smoothing"));
    model.history = history_from_json(j.at("history"), final_state.params, model.kinds);
    if (model.history.size() == 0) throw ContractError("model: empty smoothing history");
    return model;
}

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    os << j.dump(1) << '\n';
}

nlohmann::ordered_json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read " + path.string());
    try {
        return nlohmann::ordered_json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace

void save_model(const FittedModel& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto j = model_to_json(model);
    write_json(dir / "config.json", j.at("config"));
    write_json(dir / "smoothing.json", j.at("smoothing"));
    write_json(dir / "history.json", j.at("history"));
    write_json(dir / "params.json", j.at("params"));
}

FittedModel load_model(const std::filesystem::path& dir) {
    nlohmann::ordered_json j = {{"format_version", 1},
                                {"config", read_json(dir / "config.json")},
                                {"smoothing", read_json(dir / "smoothing.json")},
                                {"history", read_json(dir / "history.json")},
                                {"params", read_json(dir / "params.json")}};
    return model_from_json(j);
}

}  // namespace meslstm
