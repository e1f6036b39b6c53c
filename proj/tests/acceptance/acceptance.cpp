// Acceptance checks, one PASS/FAIL line per criterion.
//   meslstm_acceptance              run all
//   meslstm_acceptance --criterion 6

#include "meslstm/error.hpp"
#include "meslstm/experiment.hpp"
#include "meslstm/ingest.hpp"
#include "meslstm/metrics.hpp"
#include "meslstm/neural.hpp"
#include "meslstm/pipeline.hpp"
#include "meslstm/smoothing.hpp"
#include "meslstm/variational.hpp"
#include "oracles/finite_difference.hpp"
#include "oracles/naive_smoothing.hpp"
#include "support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

using namespace meslstm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
    return Matrix::NullaryExpr(r, c, [&] { return scale * rng.normal(); });
}

// 1. Library recursions against the naive oracle, every covariate, every step.
Outcome smoothing_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(20240601);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    constexpr std::size_t T = 200;
    constexpr std::size_t k = 3;
    double worst = 0.0;
    double drift = 0.0;
    for (int draw = 0; draw < 50; ++draw) {
        SmoothingParams p;
        p.alpha = u(gen);
        p.gamma = u(gen);
        p.delta = u(gen);
        p.period = 7;
        p.freeze_trend_in_seasonal = draw % 3 == 0;
        const oracle::Constants consts{p.alpha, p.gamma, p.delta, 7, p.freeze_trend_in_seasonal};

        std::vector<std::vector<double>> y(k);
        std::vector<bool> mult(k);
        for (std::size_t c = 0; c < k; ++c) {
            mult[c] = u(gen) < 0.5;
            const double base = 10.0 + 90.0 * u(gen);
            const double amp = 0.3 * base * u(gen);
            const double slope = 0.2 * u(gen);
            for (std::size_t t = 0; t < T; ++t) {
                y[c].push_back(base + slope * static_cast<double>(t) + amp * std::sin(0.9 * static_cast<double>(t)) +
                               0.1 * base * u(gen));
            }
        }
        SmoothingState st;
        st.params = p;
        std::vector<oracle::Series> ref;
        for (std::size_t c = 0; c < k; ++c) {
            st.covariates.push_back(initialize_series(
                y[c], p, mult[c] ? SeasonalityKind::Multiplicative : SeasonalityKind::Additive));
            ref.push_back(oracle::start(y[c], consts, mult[c]));
        }
        auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
        for (std::size_t t = 0; t < T; ++t) {
            // Oracle restarted from the library's current state, so each step
            // is compared on its own; `ref` runs free alongside.
            std::vector<oracle::Series> synced;
            for (std::size_t c = 0; c < k; ++c) {
                const auto& cs = st.covariates[c];
                oracle::Series s{mult[c], cs.level, cs.trend, cs.initial_trend, {}};
                for (std::size_t a = 1; a <= 7; ++a) s.season.push_back(st.seasonal_ahead(c, a));
                synced.push_back(std::move(s));
            }
            Eigen::VectorXd obs(static_cast<Eigen::Index>(k));
            for (std::size_t c = 0; c < k; ++c) {
                obs(static_cast<Eigen::Index>(c)) = y[c][t];
                oracle::step(synced[c], y[c][t], consts);
                oracle::step(ref[c], y[c][t], consts);
            }
            st.absorb(obs);
            for (std::size_t c = 0; c < k; ++c) {
                worst = std::max(worst, rel(st.covariates[c].level, synced[c].level));
                worst = std::max(worst, rel(st.covariates[c].trend, synced[c].trend));
                drift = std::max(drift, rel(st.covariates[c].level, ref[c].level));
                for (std::size_t a = 1; a <= 7; ++a) {
                    worst = std::max(worst, rel(st.seasonal_ahead(c, a), oracle::season_ahead(synced[c], a)));
                }
            }
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 5.0,
            "worst per-step scaled difference " + fmt("%.3g", worst) + " over 50 draws (free-running level drift " +
                fmt("%.3g", drift) + "), " + fmt("%.2f", secs) + " s"};
}

// 2. Seasonal standardization after every one of 10^4 random updates.
Outcome standardization() {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_sum = 0.0;
    double worst_geo = 0.0;
    long updates = 0;
    for (int series = 0; series < 20; ++series) {
        const bool mult = series % 2 == 1;
        SmoothingParams p;
        p.alpha = u(gen);
        p.gamma = u(gen);
        p.delta = u(gen);
        p.period = 2 + static_cast<std::size_t>(u(gen) * 12);
        p.freeze_trend_in_seasonal = series % 4 < 2;
        std::vector<double> init;
        for (std::size_t t = 0; t < 3 * p.period; ++t) init.push_back(1.0 + 99.0 * u(gen));
        SmoothingState st;
        st.params = p;
        st.covariates.push_back(
            initialize_series(init, p, mult ? SeasonalityKind::Multiplicative : SeasonalityKind::Additive));
        for (int i = 0; i < 500; ++i, ++updates) {
            Eigen::VectorXd obs(1);
            obs << 1.0 + 99.0 * u(gen);
            st.absorb(obs);
            double sum = 0.0;
            double logs = 0.0;
            for (double s : st.covariates[0].seasonal) {
                sum += s;
                logs += mult ? std::log(s) : 0.0;
            }
            if (mult) worst_geo = std::max(worst_geo, std::abs(std::exp(logs / static_cast<double>(p.period)) - 1.0));
            else worst_sum = std::max(worst_sum, std::abs(sum));
        }
    }
    return {worst_sum < 1e-9 && worst_geo < 1e-9 && updates >= 10000,
            std::to_string(updates) + " updates, max |sum| " + fmt("%.3g", worst_sum) + ", max |geomean-1| " +
                fmt("%.3g", worst_geo)};
}

// 3. Analytic gradients against central differences.
Outcome gradients() {
    const auto t0 = Clock::now();
    double worst_lstm = 0.0;
    double worst_dense = 0.0;
    double worst_flip = 0.0;
    double worst_mae = 0.0;
    int dense_seeds = 0;
    int mae_seeds = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        {
            Rng rng(1000 + seed);
            auto layer = LstmLayer::initialized(3, 4, rng);
            layer.b = random_matrix(layer.b.rows(), 1, rng, 0.5);
            std::vector<Matrix> steps;
            std::vector<Matrix> weights;
            for (int t = 0; t < 6; ++t) {
                steps.push_back(random_matrix(3, 2, rng));
                weights.push_back(random_matrix(4, 2, rng));
            }
            LstmCache cache;
            lstm_forward(layer, steps, cache);
            const auto g = lstm_backward(layer, cache, weights);
            auto loss = [&] {
                LstmCache c;
                const auto hs = lstm_forward(layer, steps, c);
                double total = 0.0;
                for (std::size_t t = 0; t < hs.size(); ++t) total += hs[t].cwiseProduct(weights[t]).sum();
                return total;
            };
            worst_lstm = std::max({worst_lstm, oracle::check_gradient(layer.W, g.dW, loss).worst_relative,
                                   oracle::check_gradient(layer.U, g.dU, loss).worst_relative,
                                   oracle::check_gradient(layer.b, g.db, loss).worst_relative});
            for (std::size_t t = 0; t < steps.size(); ++t) {
                worst_lstm = std::max(worst_lstm, oracle::check_gradient(steps[t], g.dx[t], loss).worst_relative);
            }
        }
        for (auto act : {Activation::Identity, Activation::ReLU}) {
            Rng rng(2000 + seed);
            auto layer = DenseLayer::initialized(5, 3, act, rng);
            layer.bias = random_matrix(3, 1, rng);
            Matrix x = random_matrix(5, 4, rng);
            const Matrix w = random_matrix(3, 4, rng);
            DenseCache cache;
            dense_forward(layer, x, &cache);
            if (act == Activation::ReLU && cache.pre.cwiseAbs().minCoeff() < 1e-3) continue;
            const auto g = dense_backward(layer, cache, w);
            auto loss = [&] { return dense_forward(layer, x).cwiseProduct(w).sum(); };
            worst_dense = std::max({worst_dense, oracle::check_gradient(layer.weights, g.dW, loss).worst_relative,
                                    oracle::check_gradient(layer.bias, g.db, loss).worst_relative,
                                    oracle::check_gradient(x, g.dx, loss).worst_relative});
            ++dense_seeds;
        }
        {
            // Noise held fixed, so the sampled output is a smooth function of
            // the mean, scale and input.
            Rng rng(3000 + seed);
            auto layer = FlipoutDense::initialized(5, 3, rng, 0.3);
            layer.bias_mean = random_matrix(3, 1, rng);
            layer.stochastic_bias = true;
            Matrix x = random_matrix(5, 4, rng);
            const FlipoutNoise noise = draw_flipout_noise(layer, 4, rng);
            const Matrix w = random_matrix(3, 4, rng);
            FlipoutCache cache;
            flipout_forward(layer, x, noise, &cache);
            const auto g = flipout_backward(layer, cache, w);
            auto loss = [&] { return flipout_forward(layer, x, noise).cwiseProduct(w).sum(); };
            worst_flip = std::max({worst_flip, oracle::check_gradient(layer.weight_mean, g.d_weight_mean, loss).worst_relative,
                                   oracle::check_gradient(layer.weight_rho, g.d_weight_rho, loss).worst_relative,
                                   oracle::check_gradient(layer.bias_mean, g.d_bias_mean, loss).worst_relative,
                                   oracle::check_gradient(layer.bias_rho, g.d_bias_rho, loss).worst_relative,
                                   oracle::check_gradient(x, g.dx, loss).worst_relative});
        }
        {
            Rng rng(4000 + seed);
            Matrix pred = random_matrix(3, 5, rng);
            const Matrix target = random_matrix(3, 5, rng);
            if ((pred - target).cwiseAbs().minCoeff() >= 1e-3) {
                const auto r = mae_loss(pred, target);
                auto loss = [&] { return mae_loss(pred, target).value; };
                worst_mae = std::max(worst_mae, oracle::check_gradient(pred, r.gradient, loss).worst_relative);
                ++mae_seeds;
            }
        }
    }
    const double secs = seconds_since(t0);
    const double worst = std::max({worst_lstm, worst_dense, worst_flip, worst_mae});
    return {worst < 1e-4 && dense_seeds >= 20 && mae_seeds >= 20 && secs < 30.0,
            "worst relative error lstm " + fmt("%.2g", worst_lstm) + ", dense " + fmt("%.2g", worst_dense) +
                ", flipout " + fmt("%.2g", worst_flip) + ", mae " + fmt("%.2g", worst_mae) + " (" +
                std::to_string(dense_seeds) + " dense / " + std::to_string(mae_seeds) + " mae cases), " +
                fmt("%.2f", secs) + " s"};
}

// 4. Metric values worked by hand plus the sMAPE bound.
Outcome metric_oracles() {
    using V = std::vector<double>;
    std::vector<std::string> bad;
    auto near = [&](double got, double want, const char* what) {
        if (!(std::abs(got - want) <= 1e-9)) bad.push_back(std::string(what) + "=" + fmt("%.17g", got));
    };
    near(smape(V{100, 200}, V{100, 200}), 0.0, "smape_equal");
    near(smape(V{100, 200}, V{110, 180}), 10.0 / 210.0 + 20.0 / 380.0, "smape_pair");
    near(smape(V{1}, V{-1}), 2.0, "smape_max");
    near(rmse(V{1, 2, 3}, V{1, 2, 3}), 0.0, "rmse_equal");
    near(rmse(V{1, 2, 3}, V{1, 2, 5}), std::sqrt(4.0 / 3.0), "rmse");
    near(mis(V{5, 12}, V{0, 0}, V{10, 10}, 0.05), 50.0, "mis_worked");
    near(mis(V{1, 2}, V{0, 1}, V{3, 2}, 0.1), 2.0, "mis_inside");
    near(coverage(V{1, 2}, V{0, 0}, V{5, 5}), 1.0, "coverage_all");
    near(coverage(V{5, 12, 3, -1}, V{0, 0, 0, 0}, V{10, 10, 10, 10}), 0.5, "coverage_half");
    near(coverage(V{4}, V{4}, V{4}), 1.0, "coverage_point");

    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1000.0, 1000.0);
    long out_of_range = 0;
    for (int i = 0; i < 100000; ++i) {
        const double s = smape(V{u(gen)}, V{u(gen)});
        if (!(s >= 0.0 && s <= 2.0)) ++out_of_range;
    }
    std::string detail = "hand values ok: " + std::to_string(10 - bad.size()) + "/10; sMAPE outside [0,2] on " +
                         std::to_string(out_of_range) + " of 100000 random pairs";
    for (const auto& b : bad) detail += "; " + b;
    return {bad.empty() && out_of_range == 0, detail};
}

// 5. Percentile pairs and interval nesting.
Outcome interval_mechanics() {
    bool pairs = true;
    const double alphas[] = {0.05, 0.1, 0.2};
    const std::pair<double, double> want[] = {{0.025, 0.975}, {0.05, 0.95}, {0.1, 0.9}};
    for (int i = 0; i < 3; ++i) {
        const auto p = percentile_pair(alphas[i]);
        pairs = pairs && std::abs(p.first - want[i].first) < 1e-15 && std::abs(p.second - want[i].second) < 1e-15;
    }
    Rng rng(55);
    int nested = 0;
    for (int rep = 0; rep < 100; ++rep) {
        ForecastDistribution d;
        const auto n = 20 + static_cast<std::size_t>(rng.uniform(0.0, 200.0));
        for (std::size_t s = 0; s < n; ++s) d.samples.push_back(random_matrix(2, 7, rng, 1.0 + rep));
        const auto a = extract_interval(d, 0.05);
        const auto b = extract_interval(d, 0.1);
        const auto c = extract_interval(d, 0.2);
        const bool ok = (a.lower.array() <= b.lower.array()).all() && (b.lower.array() <= c.lower.array()).all() &&
                        (c.lower.array() <= c.upper.array()).all() && (c.upper.array() <= b.upper.array()).all() &&
                        (b.upper.array() <= a.upper.array()).all();
        nested += ok ? 1 : 0;
    }
    return {pairs && nested == 100,
            std::string("percentile pairs ") + (pairs ? "ok" : "wrong") + ", nested on " + std::to_string(nested) +
                "/100 distributions"};
}

// 6. End-to-end on level + exact weekly pattern + small AR(1) noise.
Outcome pipeline_identity() {
    const auto t0 = Clock::now();
    const SeriesFrame frame = testing_support::seasonal_frame(400, 3, 0.01, 606);
    ExperimentSpec spec;
    spec.model = ModelConfig{};  // S=50, 25 epochs, batch 16, m=14
    spec.ols = false;
    spec.naive = false;
    spec.trials = 10;
    spec.alphas = {0.05};
    spec.seed = 1;
    spec.jobs = std::max(1u, std::thread::hardware_concurrency());
    const EvalReport r = run_experiment(spec, {{"synthetic", frame}});
    double smape_sum = 0.0;
    double cov_sum = 0.0;
    for (const auto& m : r.metrics) smape_sum += m.smape;
    for (const auto& iv : r.intervals) cov_sum += iv.coverage;
    const double s = 100.0 * smape_sum / static_cast<double>(r.metrics.size());
    const double c = cov_sum / static_cast<double>(r.intervals.size());
    const double secs = seconds_since(t0);
    const bool ok = r.errors.empty() && r.metrics.size() == 10 && s < 2.0 && c >= 0.8 && c <= 1.0 && secs < 180.0;
    return {ok, "mean test sMAPE " + fmt("%.3f", s) + "% (< 2), mean 95% coverage " + fmt("%.1f", 100.0 * c) +
                    "% (in [80, 100]), " + std::to_string(r.errors.size()) + " failed trials, " + fmt("%.1f", secs) +
                    " s"};
}

std::filesystem::path snapshot_path() {
    if (const char* env = std::getenv("MESLSTM_OWID_SNAPSHOT"); env && *env) return env;
    return std::filesystem::path(MESLSTM_DATA_DIR) / "owid-covid-data.csv";
}

// Shared by criteria 7 and 8: five trials over the SADC members.
std::optional<std::vector<AggregateRow>> snapshot_aggregate(std::string& why) {
    const auto path = snapshot_path();
    if (!std::filesystem::exists(path)) {
        why = "UNVERIFIED: snapshot not found at " + path.string() + " (set MESLSTM_OWID_SNAPSHOT)";
        return std::nullopt;
    }
    static std::optional<std::vector<AggregateRow>> cached;
    if (!cached) {
        ExperimentSpec spec;
        spec.data.path = path;
        spec.data.countries = sadc_countries();
        spec.trials = 5;
        spec.seed = 2021;
        spec.jobs = std::max(1u, std::thread::hardware_concurrency());
        cached = aggregate(run_experiment(spec));
    }
    return cached;
}

const AggregateRow* lookup(const std::vector<AggregateRow>& agg, const std::string& country, const char* model,
                           const char* metric, double alpha = 0.0) {
    for (const auto& r : agg) {
        if (r.country == country && r.model == model && r.predictand == "total_deaths" && r.metric == metric &&
            r.alpha == alpha) {
            return &r;
        }
    }
    return nullptr;
}

// 7. Hybrid beats both baselines on deaths in most member states.
Outcome relative_skill() {
    const auto t0 = Clock::now();
    std::string why;
    const auto agg = snapshot_aggregate(why);
    if (!agg) return {false, why};
    int wins = 0;
    std::string losers;
    for (const auto& c : sadc_countries()) {
        const auto* h = lookup(*agg, c, kHybridLabel, "smape_pct");
        const auto* o = lookup(*agg, c, kOlsLabel, "smape_pct");
        const auto* n = lookup(*agg, c, kNaiveLabel, "smape_pct");
        const auto* hm = lookup(*agg, c, kHybridLabel, "mis", 0.05);
        const auto* om = lookup(*agg, c, kOlsLabel, "mis", 0.05);
        if (h && o && n && hm && om && h->mean < o->mean && h->mean < n->mean && hm->mean < om->mean) ++wins;
        else losers += " " + c;
    }
    return {wins >= 12, std::to_string(wins) + "/16 countries where the hybrid wins sMAPE and MIS(0.05) on total_deaths" +
                            (losers.empty() ? "" : "; not:" + losers) + ", " + fmt("%.0f", seconds_since(t0)) + " s"};
}

// 8. Absolute error level on deaths.
Outcome magnitude() {
    std::string why;
    const auto agg = snapshot_aggregate(why);
    if (!agg) return {false, why};
    int under = 0;
    double worst = 0.0;
    std::string over;
    for (const auto& c : sadc_countries()) {
        const auto* h = lookup(*agg, c, kHybridLabel, "smape_pct");
        if (h && h->mean < 10.0) ++under;
        else over += " " + c;
        if (h) worst = std::max(worst, h->mean);
    }
    return {under == 16, std::to_string(under) + "/16 countries below 10% total_deaths sMAPE, worst " +
                             fmt("%.2f", worst) + "%" + (over.empty() ? "" : "; over:" + over)};
}

// 9. Degenerate and separated cases of both significance tests.
Outcome statistical_tests() {
    using V = std::vector<double>;
    std::vector<std::string> bad;
    const auto same = t_test_one_sided(V{3, 1, 4, 1, 5}, V{3, 1, 4, 1, 5});
    if (!(same.statistic == 0.0 && std::abs(same.p_value - 0.5) < 1e-12)) bad.push_back("t identical");
    const auto flat = t_test_one_sided(V{2, 2, 2}, V{2, 2, 2});
    if (!(flat.degenerate && flat.statistic == 0.0 && flat.p_value == 0.5)) bad.push_back("t constant equal");

    const V y{10, 20, 30, 40, 50};
    const V f{11, 18, 33, 41, 47};
    const auto dm_same = dm_test(y, f, f);
    if (!(dm_same.degenerate && dm_same.statistic == 0.0)) bad.push_back("dm identical");

    std::mt19937_64 gen(9);
    std::normal_distribution<double> z(0.0, 1.0);
    V actual;
    V perfect;
    V poor;
    for (int i = 0; i < 60; ++i) {
        actual.push_back(100.0 + z(gen));
        perfect.push_back(actual.back());
        poor.push_back(actual.back() + 20.0 + 2.0 * z(gen));
    }
    const auto sep = dm_test(actual, perfect, poor);
    if (!(sep.statistic < 0.0 && sep.p_value < 1e-4)) bad.push_back("dm separated p=" + fmt("%.3g", sep.p_value));

    // Same mean, different spread.
    V a;
    V b;
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 35; ++i) a.push_back(u(gen));
    double mean = 0.0;
    for (double v : a) mean += v / 35.0;
    for (double v : a) b.push_back(mean + 0.5 * (v - mean));
    const auto eq = t_test_one_sided(a, b);
    if (!(eq.p_value >= 0.4 && eq.p_value <= 0.6)) bad.push_back("t equal means p=" + fmt("%.3g", eq.p_value));

    std::string detail = "separated DM p " + fmt("%.3g", sep.p_value) + ", equal-mean t p " + fmt("%.3f", eq.p_value);
    for (const auto& s : bad) detail += "; failed: " + s;
    return {bad.empty(), detail};
}

// 10. Two runs of the same experiment write identical bytes.
Outcome determinism() {
    ExperimentSpec spec;
    spec.data.path = std::filesystem::path(MESLSTM_DATA_DIR) / "fixtures" / "owid_synthetic.csv";
    spec.data.countries = {"Angola", "Lesotho", "Zambia"};
    spec.data.features = {"total_cases", "total_deaths", "stringency_index", "reproduction_rate", "population"};
    spec.model.lstm_size = 8;
    spec.model.epochs = 3;
    spec.model.window = 7;
    spec.model.mc_samples = 50;
    spec.trials = 3;
    spec.seed = 42;
    spec.jobs = 2;
    const auto a = testing_support::scratch_dir("acceptance_run_a");
    const auto b = testing_support::scratch_dir("acceptance_run_b");
    write_report(run_experiment(spec), a);
    write_report(run_experiment(spec), b);
    int same = 0;
    int total = 0;
    std::string differ;
    for (const auto& entry : std::filesystem::directory_iterator(a)) {
        if (entry.path().extension() != ".csv") continue;
        ++total;
        const auto name = entry.path().filename();
        if (testing_support::slurp(a / name) == testing_support::slurp(b / name)) ++same;
        else differ += " " + name.string();
    }
    return {total == 5 && same == total,
            std::to_string(same) + "/" + std::to_string(total) + " CSV files byte-identical" +
                (differ.empty() ? "" : "; differ:" + differ)};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    int only = 0;
    app.add_option("--criterion", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all = {
        {1, "smoothing oracle equivalence", smoothing_oracle},
        {2, "seasonal standardization", standardization},
        {3, "gradient checks", gradients},
        {4, "metric oracles", metric_oracles},
        {5, "interval mechanics", interval_mechanics},
        {6, "pipeline identity", pipeline_identity},
        {7, "relative skill on snapshot", relative_skill},
        {8, "magnitude on snapshot", magnitude},
        {9, "statistical tests", statistical_tests},
        {10, "determinism", determinism},
    };
    int failed = 0;
    for (const auto& c : all) {
        if (only != 0 && c.id != only) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail
                  << std::endl;
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
