#include "meslstm/smoothing.hpp"

#include "meslstm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace meslstm {

std::string to_string(SeasonalityKind kind) {
    return kind == SeasonalityKind::Additive ? "additive" : "multiplicative";
}

SeasonalityKind seasonality_from_string(const std::string& name) {
    if (name == "additive") return SeasonalityKind::Additive;
    if (name == "multiplicative") return SeasonalityKind::Multiplicative;
    throw ContractError("unknown seasonality kind '" + name + "'");
}

void SmoothingParams::validate() const {
    for (double c : {alpha, gamma, delta}) {
        if (!(c >= 0.0 && c <= 1.0)) throw ContractError("SmoothingParams: constants must lie in [0,1]");
    }
    if (period < 2) throw ContractError("SmoothingParams: period must be at least 2");
}

namespace {

void standardize(std::vector<double>& seasonal, SeasonalityKind kind) {
    const double n = static_cast<double>(seasonal.size());
    if (kind == SeasonalityKind::Additive) {
        const double mean = std::accumulate(seasonal.begin(), seasonal.end(), 0.0) / n;
        for (double& s : seasonal) s -= mean;
    } else {
        double log_sum = 0.0;
        for (double s : seasonal) log_sum += std::log(s);
        const double gmean = std::exp(log_sum / n);
        for (double& s : seasonal) s /= gmean;
    }
}

bool all_positive(std::span<const double> y) {
    return std::all_of(y.begin(), y.end(), [](double v) { return v > 0.0; });
}

std::vector<double> row_of(const SeriesFrame& frame, std::size_t c) {
    const auto& v = frame.values();
    std::vector<double> out(frame.length());
    for (std::size_t t = 0; t < out.size(); ++t) {
        out[t] = v(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t));
    }
    return out;
}

}  // namespace

CovariateState initialize_series(std::span<const double> y, const SmoothingParams& params,
                                 SeasonalityKind kind) {
    params.validate();
    const std::size_t n = y.size();
    const std::size_t period = params.period;
    if (n < 2 * period) {
        throw InsufficientDataError("initialize: need at least " + std::to_string(2 * period) +
                                    " observations, have " + std::to_string(n));
    }
    if (kind == SeasonalityKind::Multiplicative && !all_positive(y)) {
        throw DomainError("initialize: multiplicative seasonality requires strictly positive data");
    }

    CovariateState s;
    s.kind = kind;
    s.level = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    const double increments = static_cast<double>(n - 1);
    // The level is the in-sample mean, so the level-plus-trend line passes
    // through it at the sample midpoint.
    const double mid = increments / 2.0;
    s.seasonal.resize(period);
    if (kind == SeasonalityKind::Additive) {
        s.trend = (y[n - 1] - y[0]) / increments;
        for (std::size_t p = 0; p < period; ++p) {
            s.seasonal[p] = y[p] - (s.level + s.trend * (static_cast<double>(p) - mid));
        }
    } else {
        s.trend = std::pow(y[n - 1] / y[0], 1.0 / increments);
        for (std::size_t p = 0; p < period; ++p) {
            s.seasonal[p] = y[p] / (s.level * std::pow(s.trend, static_cast<double>(p) - mid));
        }
    }
    s.initial_trend = s.trend;
    standardize(s.seasonal, kind);
    return s;
}

SmoothingState initialize(const SeriesFrame& train, const SmoothingParams& params,
                          const std::vector<SeasonalityKind>& kinds) {
    if (kinds.size() != train.covariates()) {
        throw ContractError("initialize: one seasonality kind per covariate required");
    }
    SmoothingState state;
    state.params = params;
    state.covariates.reserve(kinds.size());
    for (std::size_t c = 0; c < kinds.size(); ++c) {
        const auto y = row_of(train, c);
        state.covariates.push_back(initialize_series(y, params, kinds[c]));
    }
    return state;
}

SmoothingState initialize(const SeriesFrame& train, const SmoothingParams& params,
                          SeasonalityKind kind) {
    return initialize(train, params, std::vector<SeasonalityKind>(train.covariates(), kind));
}

void update_series(CovariateState& s, double y, std::size_t phase, const SmoothingParams& p) {
    const double s_old = s.seasonal[phase];
    const double l_old = s.level;
    const double b_old = s.trend;
    if (s.kind == SeasonalityKind::Additive) {
        s.level = p.alpha * (y - s_old) + (1.0 - p.alpha) * (l_old + b_old);
        s.trend = p.gamma * (s.level - l_old) + (1.0 - p.gamma) * b_old;
        s.seasonal[phase] = p.delta * (y - s.level) + (1.0 - p.delta) * s_old;
    } else {
        if (!(y > 0.0)) {
            throw DomainError("update: multiplicative seasonality requires strictly positive data");
        }
        const double b_den = p.freeze_trend_in_seasonal ? s.initial_trend : b_old;
        s.level = p.alpha * (y / s_old) + (1.0 - p.alpha) * l_old * b_old;
        s.trend = p.gamma * (s.level / l_old) + (1.0 - p.gamma) * b_old;
        s.seasonal[phase] = p.delta * y / (l_old * b_den) + (1.0 - p.delta) * s_old;
    }
    standardize(s.seasonal, s.kind);
}

void SmoothingState::absorb(const Eigen::Ref<const Eigen::VectorXd>& y_next) {
    if (static_cast<std::size_t>(y_next.size()) != covariates.size()) {
        throw ContractError("update: observation size does not match covariate count");
    }
    const std::size_t ph = phase(1);
    for (std::size_t c = 0; c < covariates.size(); ++c) {
        update_series(covariates[c], y_next(static_cast<Eigen::Index>(c)), ph, params);
    }
    ++steps;
}

SmoothingState update(const SmoothingState& state, const Eigen::Ref<const Eigen::VectorXd>& y_next) {
    SmoothingState next = state;
    next.absorb(y_next);
    return next;
}

Eigen::MatrixXd pure_es_forecast(const SmoothingState& state, std::size_t horizon) {
    if (state.covariates.empty()) throw ContractError("pure_es_forecast: state not initialized");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(state.size()), static_cast<Eigen::Index>(horizon));
    for (std::size_t c = 0; c < state.size(); ++c) {
        const auto& cs = state.covariates[c];
        for (std::size_t h = 1; h <= horizon; ++h) {
            const double s = state.seasonal_ahead(c, h);
            const double hh = static_cast<double>(h);
            out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(h - 1)) =
                cs.kind == SeasonalityKind::Additive ? cs.level + hh * cs.trend + s
                                                     : cs.level * std::pow(cs.trend, hh) * s;
        }
    }
    return out;
}

double one_step_sse(std::span<const double> y, const SmoothingParams& params, SeasonalityKind kind) {
    CovariateState s = initialize_series(y, params, kind);
    double sse = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        const std::size_t ph = t % params.period;
        const double pred = kind == SeasonalityKind::Additive ? s.level + s.trend + s.seasonal[ph]
                                                              : s.level * s.trend * s.seasonal[ph];
        const double e = y[t] - pred;
        sse += e * e;
        update_series(s, y[t], ph, params);
    }
    return sse;
}

KindSelection select_kind(const SeriesFrame& train, const SmoothingParams& params) {
    KindSelection sel;
    const std::size_t k = train.covariates();
    sel.kinds.resize(k);
    sel.additive_sse.resize(k);
    sel.multiplicative_sse.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const auto y = row_of(train, c);
        sel.additive_sse[c] = one_step_sse(y, params, SeasonalityKind::Additive);
        sel.multiplicative_sse[c] = all_positive(y)
                                        ? one_step_sse(y, params, SeasonalityKind::Multiplicative)
                                        : std::numeric_limits<double>::infinity();
        // NaN SSE (overflowing multiplicative fit) never wins.
        sel.kinds[c] = sel.multiplicative_sse[c] < sel.additive_sse[c] ? SeasonalityKind::Multiplicative
                                                                       : SeasonalityKind::Additive;
    }
    return sel;
}

StateHistory run_history(SmoothingState state, const SeriesFrame& frame) {
    if (state.size() != frame.covariates()) {
        throw ContractError("run_history: state and frame covariate counts differ");
    }
    StateHistory hist;
    hist.days = frame.days();
    hist.states.reserve(frame.length());
    for (std::size_t t = 0; t < frame.length(); ++t) {
        state.absorb(frame.values().col(static_cast<Eigen::Index>(t)));
        hist.states.push_back(state);
    }
    return hist;
}

double deseasonalize_value(SeasonalityKind kind, double y, double level, double seasonal) {
    if (kind == SeasonalityKind::Additive) return y - level - seasonal;
    const double denom = level * seasonal;
    if (denom == 0.0) throw DomainError("deseasonalize: level * seasonal is zero");
    return y / denom;
}

double reseasonalize_value(SeasonalityKind kind, double raw, double level, double seasonal,
                           double offset) {
    return kind == SeasonalityKind::Additive ? level + offset * raw + seasonal : raw * level * seasonal;
}

double raw_target_value(SeasonalityKind kind, double actual, double level, double seasonal,
                        double offset) {
    if (kind == SeasonalityKind::Additive) return (actual - level - seasonal) / offset;
    const double denom = level * seasonal;
    if (denom == 0.0) throw DomainError("raw_targets: level * seasonal is zero");
    return actual / denom;
}

Eigen::MatrixXd deseasonalize_block(const Eigen::Ref<const Eigen::MatrixXd>& values,
                                    std::span<const SmoothingState> states) {
    if (static_cast<std::size_t>(values.cols()) != states.size()) {
        throw ContractError("deseasonalize: one state snapshot per step required");
    }
    Eigen::MatrixXd out(values.rows(), values.cols());
    for (Eigen::Index t = 0; t < values.cols(); ++t) {
        const auto& st = states[static_cast<std::size_t>(t)];
        if (st.size() != static_cast<std::size_t>(values.rows())) {
            throw ContractError("deseasonalize: snapshot covariate count mismatch");
        }
        for (Eigen::Index c = 0; c < values.rows(); ++c) {
            const auto cu = static_cast<std::size_t>(c);
            const auto& cs = st.covariates[cu];
            out(c, t) = deseasonalize_value(cs.kind, values(c, t), cs.level, st.seasonal_current(cu));
        }
    }
    return out;
}

SeriesFrame deseasonalize(const SeriesFrame& frame, const StateHistory& history) {
    if (history.size() != frame.length()) {
        throw ContractError("deseasonalize: history length does not match frame length");
    }
    if (history.days != frame.days()) {
        throw ContractError("deseasonalize: history dates do not match frame dates");
    }
    return SeriesFrame(frame.days(), deseasonalize_block(frame.values(), history.states),
                       frame.column_names(), frame.predictand_indices());
}

Eigen::MatrixXd reseasonalize(const Eigen::Ref<const Eigen::MatrixXd>& raw, const SmoothingState& state,
                              std::span<const std::size_t> predictands) {
    if (static_cast<std::size_t>(raw.rows()) != predictands.size()) {
        throw ContractError("reseasonalize: one output row per predictand required");
    }
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
        const std::size_t c = predictands[static_cast<std::size_t>(r)];
        const auto& cs = state.covariates.at(c);
        for (Eigen::Index h = 0; h < raw.cols(); ++h) {
            const auto ahead = static_cast<std::size_t>(h) + 1;
            out(r, h) = reseasonalize_value(cs.kind, raw(r, h), cs.level, state.seasonal_ahead(c, ahead),
                                            static_cast<double>(ahead));
        }
    }
    return out;
}

Eigen::MatrixXd raw_targets(const Eigen::Ref<const Eigen::MatrixXd>& actual, const SmoothingState& state,
                            std::span<const std::size_t> predictands) {
    if (static_cast<std::size_t>(actual.rows()) != predictands.size()) {
        throw ContractError("raw_targets: one row per predictand required");
    }
    Eigen::MatrixXd out(actual.rows(), actual.cols());
    for (Eigen::Index r = 0; r < actual.rows(); ++r) {
        const std::size_t c = predictands[static_cast<std::size_t>(r)];
        const auto& cs = state.covariates.at(c);
        for (Eigen::Index h = 0; h < actual.cols(); ++h) {
            const auto ahead = static_cast<std::size_t>(h) + 1;
            out(r, h) = raw_target_value(cs.kind, actual(r, h), cs.level, state.seasonal_ahead(c, ahead),
                                         static_cast<double>(ahead));
        }
    }
    return out;
}

std::size_t parameter_count(std::size_t covariates, std::size_t period) {
    if (covariates < 1) throw ContractError("parameter_count: need at least one covariate");
    if (period < 2) throw ContractError("parameter_count: period must be at least 2");
    return (covariates + 1) * (2 + period);
}

nlohmann::ordered_json state_to_json(const SmoothingState& state, const std::vector<std::string>& names) {
    if (names.size() != state.size()) throw ContractError("state_to_json: one name per covariate required");
    nlohmann::ordered_json params = {{"alpha", state.params.alpha},
                                     {"gamma", state.params.gamma},
                                     {"delta", state.params.delta},
                                     {"period", state.params.period},
                                     {"freeze_trend_in_seasonal", state.params.freeze_trend_in_seasonal}};
    nlohmann::ordered_json covs = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < state.size(); ++c) {
        const auto& cs = state.covariates[c];
        covs[names[c]] = {{"level", cs.level},
                          {"trend", cs.trend},
                          {"initial_trend", cs.initial_trend},
                          {"seasonal", cs.seasonal},
                          {"kind", to_string(cs.kind)},
                          {"params", params}};
    }
    return {{"format_version", 1}, {"steps", state.steps}, {"covariates", covs}};
}

SmoothingState state_from_json(const nlohmann::ordered_json& j, std::vector<std::string>* names) {
    if (j.at("format_version").get<int>() != 1) throw ContractError("smoothing state: unsupported format version");
    SmoothingState state;
    state.steps = j.at("steps").get<std::size_t>();
    bool have_params = false;
    for (const auto& [name, cj] : j.at("covariates").items()) {
        CovariateState cs;
        cs.level = cj.at("level").get<double>();
        cs.trend = cj.at("trend").get<double>();
        cs.initial_trend = cj.at("initial_trend").get<double>();
        cs.seasonal = cj.at("seasonal").get<std::vector<double>>();
        cs.kind = seasonality_from_string(cj.at("kind").get<std::string>());
        if (!have_params) {
            const auto& pj = cj.at("params");
            state.params.alpha = pj.at("alpha").get<double>();
            state.params.gamma = pj.at("gamma").get<double>();
            state.params.delta = pj.at("delta").get<double>();
            state.params.period = pj.at("period").get<std::size_t>();
            state.params.freeze_trend_in_seasonal = pj.at("freeze_trend_in_seasonal").get<bool>();
            have_params = true;
        }
        if (cs.seasonal.size() != state.params.period) {
            throw ContractError("smoothing state: seasonal length does not match period");
        }
        state.covariates.push_back(std::move(cs));
        if (names) names->push_back(name);
    }
    return state;
}

}  // namespace meslstm
