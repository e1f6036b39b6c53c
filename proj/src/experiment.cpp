#include "meslstm/experiment.hpp"

#include "meslstm/baselines.hpp"
#include "meslstm/error.hpp"
#include "meslstm/metrics.hpp"
#include "meslstm/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

namespace meslstm {

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace {

std::string alpha_label(double a) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", a);
    return buf;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::span<const double> row_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

void ExperimentSpec::validate() const {
    if (trials < 1) throw ContractError("experiment: trials must be at least 1");
    if (alphas.empty()) throw ContractError("experiment: at least one significance level required");
    for (double a : alphas) {
        if (!(a > 0.0 && a < 1.0)) throw ContractError("experiment: significance levels must lie in (0,1)");
    }
    if (jobs < 1) throw ContractError("experiment: jobs must be at least 1");
    split.validate();
    model.validate();
}

ExperimentSpec experiment_from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir) {
    ExperimentSpec s;
    for (const auto& [key, v] : j.items()) {
        if (key == "data") {
            for (const auto& [dk, dv] : v.items()) {
                if (dk == "path") {
                    std::filesystem::path p = dv.get<std::string>();
                    s.data.path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
                } else if (dk == "countries") {
                    if (dv.is_string() && dv.get<std::string>() == "SADC") s.data.countries = sadc_countries();
                    else s.data.countries = dv.get<std::vector<std::string>>();
                } else if (dk == "features") s.data.features = dv.get<std::vector<std::string>>();
                else if (dk == "predictands") s.data.predictands = dv.get<std::vector<std::string>>();
                else if (dk == "fill") {
                    const auto f = dv.get<std::string>();
                    if (f == "default") s.data.fill = FillPolicy::Default;
                    else if (f == "forward") s.data.fill = FillPolicy::ForwardOnly;
                    else throw ContractError("experiment: fill must be 'default' or 'forward'");
                } else if (dk == "drop_per_capita") s.data.drop_per_capita = dv.get<bool>();
                else throw ContractError("experiment: unknown data key '" + dk + "'");
            }
        } else if (key == "model") {
            s.model = config_from_json(v, s.model);
        } else if (key == "grid") {
            GridSpec g;
            for (const auto& [gk, gv] : v.items()) {
                if (gk == "lstm_sizes") g.lstm_sizes = gv.get<std::vector<std::size_t>>();
                else if (gk == "epochs") g.epochs = gv.get<std::vector<std::size_t>>();
                else if (gk == "batch_sizes") g.batch_sizes = gv.get<std::vector<std::size_t>>();
                else if (gk == "windows") g.windows = gv.get<std::vector<std::size_t>>();
                else throw ContractError("experiment: unknown grid key '" + gk + "'");
            }
            s.grid = g;
        } else if (key == "baselines") {
            for (const auto& [bk, bv] : v.items()) {
                if (bk == "ols") s.ols = bv.get<bool>();
                else if (bk == "naive") s.naive = bv.get<bool>();
                else throw ContractError("experiment: unknown baseline '" + bk + "'");
            }
        } else if (key == "trials") s.trials = v.get<std::size_t>();
        else if (key == "alphas") s.alphas = v.get<std::vector<double>>();
        else if (key == "seed") s.seed = v.get<std::uint64_t>();
        else if (key == "split") {
            for (const auto& [sk, sv] : v.items()) {
                if (sk == "train") s.split.train_fraction = sv.get<double>();
                else if (sk == "validation") s.split.validation_fraction = sv.get<double>();
                else if (sk == "test") s.split.test_fraction = sv.get<double>();
                else throw ContractError("experiment: unknown split key '" + sk + "'");
            }
        } else if (key == "out") s.out = v.get<std::string>();
        else if (key == "jobs") s.jobs = v.get<std::size_t>();
        else throw ContractError("experiment: unknown key '" + key + "'");
    }
    return s;
}

ExperimentSpec load_experiment(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot read " + file.string());
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(file.string() + ": " + e.what());
    }
    return experiment_from_json(j, file.parent_path());
}

nlohmann::ordered_json experiment_to_json(const ExperimentSpec& s) {
    nlohmann::ordered_json j = {
        {"data",
         {{"path", s.data.path.string()},
          {"countries", s.data.countries},
          {"features", s.data.features},
          {"predictands", s.data.predictands},
          {"fill", s.data.fill == FillPolicy::Default ? "default" : "forward"},
          {"drop_per_capita", s.data.drop_per_capita}}},
        {"model", config_to_json(s.model)}};
    if (s.grid) {
        j["grid"] = {{"lstm_sizes", s.grid->lstm_sizes},
                     {"epochs", s.grid->epochs},
                     {"batch_sizes", s.grid->batch_sizes},
                     {"windows", s.grid->windows}};
    }
    j["baselines"] = {{"ols", s.ols}, {"naive", s.naive}};
    j["trials"] = s.trials;
    j["alphas"] = s.alphas;
    j["seed"] = s.seed;
    j["split"] = {{"train", s.split.train_fraction},
                  {"validation", s.split.validation_fraction},
                  {"test", s.split.test_fraction}};
    j["out"] = s.out.string();
    j["jobs"] = s.jobs;
    return j;
}

namespace {

struct TaskResult {
    std::vector<MetricRow> metrics;
    std::vector<IntervalRow> intervals;
    std::vector<ForecastRow> forecasts;
    std::optional<TrialError> error;
};

/// Scores one model's j x n forecast (and optional intervals) over the test days.
void score(TaskResult& out, const std::string& country, const std::string& model, std::size_t trial,
           const SeriesFrame& test, const Eigen::MatrixXd& point, const std::vector<Interval>* intervals,
           const std::vector<double>& alphas) {
    const Eigen::MatrixXd actual = test.predictand_values();
    const auto& names = test.column_names();
    const auto& preds = test.predictand_indices();
    for (std::size_t r = 0; r < preds.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        const Eigen::VectorXd a = actual.row(ri).transpose();
        const Eigen::VectorXd p = point.row(ri).transpose();
        out.metrics.push_back({country, model, names[preds[r]], trial, smape(row_span(a), row_span(p)),
                               rmse(row_span(a), row_span(p)), mae(row_span(a), row_span(p))});
        if (intervals) {
            for (const auto& iv : *intervals) {
                const Eigen::VectorXd lo = iv.lower.row(ri).transpose();
                const Eigen::VectorXd up = iv.upper.row(ri).transpose();
                out.intervals.push_back({country, model, names[preds[r]], trial, iv.alpha,
                                         mis(row_span(a), row_span(lo), row_span(up), iv.alpha),
                                         coverage(row_span(a), row_span(lo), row_span(up))});
            }
        }
        for (std::size_t t = 0; t < test.length(); ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            ForecastRow f{country, model, trial, test.days()[t], names[preds[r]], a(ti), p(ti), {}, {}};
            for (double alpha : alphas) {
                double lo = kNaN;
                double up = kNaN;
                if (intervals) {
                    for (const auto& iv : *intervals) {
                        if (iv.alpha == alpha) {
                            lo = iv.lower(ri, ti);
                            up = iv.upper(ri, ti);
                        }
                    }
                }
                f.lower.push_back(lo);
                f.upper.push_back(up);
            }
            out.forecasts.push_back(std::move(f));
        }
    }
}

/// Baselines forecast the test segment in the same m-step blocks as the
/// hybrid, conditioning each block on every observation before it.
void run_baselines(TaskResult& out, const ExperimentSpec& spec, const std::string& country, std::size_t trial,
                   const SeriesFrame& prior, const SeriesFrame& test, std::size_t m, std::size_t period) {
    const SeriesFrame full = prior.concat(test);
    const auto j = static_cast<Eigen::Index>(test.predictand_count());
    const auto n = static_cast<Eigen::Index>(test.length());
    const std::size_t start = prior.length();

    if (spec.ols) {
        const OlsModel ols = ols_fit(prior);
        Eigen::MatrixXd point(j, n);
        std::vector<Interval> ivs;
        for (double a : spec.alphas) ivs.push_back({a, Eigen::MatrixXd(j, n), Eigen::MatrixXd(j, n)});
        for (std::size_t o = 0; o < test.length(); o += m) {
            const std::size_t h = std::min(m, test.length() - o);
            Eigen::MatrixXd x(static_cast<Eigen::Index>(ols.predictor_indices.size()), static_cast<Eigen::Index>(h));
            for (std::size_t c = 0; c < ols.predictor_indices.size(); ++c) {
                x.row(static_cast<Eigen::Index>(c)).setConstant(
                    full.values()(static_cast<Eigen::Index>(ols.predictor_indices[c]),
                                  static_cast<Eigen::Index>(start + o - 1)));
            }
            const auto oi = static_cast<Eigen::Index>(o);
            const auto hi = static_cast<Eigen::Index>(h);
            point.middleCols(oi, hi) = ols_predict(ols, x);
            for (auto& iv : ivs) {
                const Interval b = ols_intervals(ols, x, iv.alpha);
                iv.lower.middleCols(oi, hi) = b.lower;
                iv.upper.middleCols(oi, hi) = b.upper;
            }
        }
        score(out, country, kOlsLabel, trial, test, point, &ivs, spec.alphas);
    }
    if (spec.naive) {
        const Eigen::MatrixXd pv = full.predictand_values();
        Eigen::MatrixXd point(j, n);
        for (std::size_t o = 0; o < test.length(); o += m) {
            const std::size_t h = std::min(m, test.length() - o);
            const Eigen::MatrixXd tail = pv.leftCols(static_cast<Eigen::Index>(start + o)).rightCols(
                static_cast<Eigen::Index>(period));
            point.middleCols(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(h)) =
                seasonal_naive(tail, period, h);
        }
        score(out, country, kNaiveLabel, trial, test, point, nullptr, spec.alphas);
    }
}

TaskResult run_task(const ExperimentSpec& spec, const std::string& country, const SeriesFrame& frame,
                    const ModelConfig& base, std::size_t trial) {
    TaskResult out;
    try {
        ModelConfig cfg = base;
        cfg.seed = spec.seed + trial;
        cfg.alphas = spec.alphas;
        const std::size_t m = cfg.window;
        const Partitions parts = split(frame, spec.split, m);
        const SeriesFrame prior = parts.train.concat(parts.validation);

        const FittedModel model = extend(fit(parts.train, parts.validation, cfg), parts.validation);
        const SegmentForecast sf = forecast_segment(model, prior, parts.test, derive_seed(cfg.seed, 0, "test-forecast"));
        score(out, country, kHybridLabel, trial, parts.test, sf.point, &sf.intervals, spec.alphas);
        run_baselines(out, spec, country, trial, prior, parts.test, m, cfg.smoothing.period);
    } catch (const Error& e) {
        out = TaskResult{};
        out.error = TrialError{country, trial, e.what(), dynamic_cast<const TrainingDivergenceError*>(&e) != nullptr};
    }
    return out;
}

template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& body) {
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

EvalReport run_experiment(const ExperimentSpec& spec, const std::map<std::string, SeriesFrame>& frames) {
    spec.validate();
    if (frames.empty()) throw ContractError("experiment: no country frames to evaluate");

    std::vector<std::string> countries;
    if (spec.data.countries.empty()) {
        for (const auto& [c, f] : frames) countries.push_back(c);
    } else {
        for (const auto& c : spec.data.countries) {
            if (frames.count(c)) countries.push_back(c);
        }
    }

    EvalReport report;
    report.alphas = spec.alphas;
    report.trials = spec.trials;

    std::map<std::string, ModelConfig> configs;
    for (const auto& c : countries) {
        ModelConfig cfg = spec.model;
        if (spec.grid) {
            GridSpec g = *spec.grid;
            g.base = spec.model;
            g.base.seed = spec.seed;
            const Partitions parts = split(frames.at(c), spec.split, *std::max_element(g.windows.begin(), g.windows.end()));
            cfg = grid_search(parts.train, parts.validation, g, spec.jobs).best;
            report.tuned.emplace(c, cfg);
        }
        configs.emplace(c, cfg);
    }

    const std::size_t n_tasks = countries.size() * spec.trials;
    std::vector<TaskResult> results(n_tasks);
    parallel_for(n_tasks, spec.jobs, [&](std::size_t i) {
        const std::string& c = countries[i / spec.trials];
        results[i] = run_task(spec, c, frames.at(c), configs.at(c), i % spec.trials);
    });

    for (auto& r : results) {
        if (r.error) {
            report.errors.push_back(*r.error);
            continue;
        }
        report.metrics.insert(report.metrics.end(), r.metrics.begin(), r.metrics.end());
        report.intervals.insert(report.intervals.end(), r.intervals.begin(), r.intervals.end());
        std::move(r.forecasts.begin(), r.forecasts.end(), std::back_inserter(report.forecasts));
    }
    if (report.errors.size() == n_tasks) {
        const bool all_diverged = std::all_of(report.errors.begin(), report.errors.end(),
                                              [](const TrialError& e) { return e.divergence; });
        const std::string msg = "every trial failed; first error: " + report.errors.front().message;
        if (all_diverged) throw TrainingDivergenceError(-1, msg);
        throw DataError(msg);
    }
    add_significance_tests(report);
    return report;
}

EvalReport run_experiment(const ExperimentSpec& spec) {
    IngestSpec base;
    base.path = spec.data.path;
    base.features = spec.data.features;
    base.predictands = spec.data.predictands;
    base.fill = spec.data.fill;
    base.drop_per_capita = spec.data.drop_per_capita;
    if (spec.data.countries.empty()) throw ContractError("experiment: no countries listed");
    const MultiLoad loaded = multi_load(base, spec.data.countries);
    std::map<std::string, SeriesFrame> frames;
    for (const auto& [c, r] : loaded.frames) frames.emplace(c, r.frame);
    if (frames.empty()) throw DataError("experiment: no country could be loaded");
    EvalReport report = run_experiment(spec, frames);
    for (const auto& [c, msg] : loaded.errors) report.errors.push_back({c, 0, "ingest: " + msg, false});
    return report;
}

void add_significance_tests(EvalReport& report) {
    report.tests.clear();
    // Ordered keys for deterministic output.
    std::vector<std::string> countries;
    std::vector<std::string> models;
    std::vector<std::string> predictands;
    auto note = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    for (const auto& m : report.metrics) {
        note(countries, m.country);
        note(models, m.model);
        note(predictands, m.predictand);
    }
    auto series = [&](const std::string& c, const std::string& model, const std::string& p, const char* metric) {
        std::vector<double> v;
        for (const auto& m : report.metrics) {
            if (m.country == c && m.model == model && m.predictand == p) {
                v.push_back(std::string(metric) == "smape" ? m.smape : m.rmse);
            }
        }
        return v;
    };
    auto interval_series = [&](const std::string& c, const std::string& model, const std::string& p, double a,
                               bool want_mis) {
        std::vector<double> v;
        for (const auto& r : report.intervals) {
            if (r.country == c && r.model == model && r.predictand == p && r.alpha == a) {
                v.push_back(want_mis ? r.mis : r.coverage);
            }
        }
        return v;
    };
    auto push_t = [&](const std::string& c, const std::string& p, const std::string& b, const std::string& metric,
                      const std::vector<double>& first, const std::vector<double>& second) {
        if (first.size() < 2 || second.size() < 2) return;
        const TestResult t = t_test_one_sided(first, second);
        report.tests.push_back({c, p, b, "t", metric, t.statistic, t.p_value, t.degenerate, t.degrees_of_freedom, 0});
    };

    for (const auto& c : countries) {
        for (const auto& p : predictands) {
            for (const auto& b : models) {
                if (b == kHybridLabel) continue;
                // One-sided: H1 says the hybrid's mean loss is lower.
                push_t(c, p, b, "smape", series(c, kHybridLabel, p, "smape"), series(c, b, p, "smape"));
                push_t(c, p, b, "rmse", series(c, kHybridLabel, p, "rmse"), series(c, b, p, "rmse"));
                for (double a : report.alphas) {
                    push_t(c, p, b, "mis_" + alpha_label(a), interval_series(c, kHybridLabel, p, a, true),
                           interval_series(c, b, p, a, true));
                    // Coverage is better when higher, so the samples swap sides.
                    push_t(c, p, b, "coverage_" + alpha_label(a), interval_series(c, b, p, a, false),
                           interval_series(c, kHybridLabel, p, a, false));
                }

                // DM: trial-averaged hybrid point against the baseline's first trial.
                std::map<std::int64_t, std::pair<double, std::size_t>> hybrid;
                std::map<std::int64_t, std::pair<double, double>> base;  // actual, point
                std::optional<std::size_t> base_trial;
                for (const auto& f : report.forecasts) {
                    if (f.country != c || f.predictand != p) continue;
                    if (f.model == kHybridLabel) {
                        auto& [sum, cnt] = hybrid[f.day];
                        sum += f.point;
                        ++cnt;
                    } else if (f.model == b) {
                        if (!base_trial) base_trial = f.trial;
                        if (f.trial == *base_trial) base[f.day] = {f.actual, f.point};
                    }
                }
                std::vector<double> actual;
                std::vector<double> fa;
                std::vector<double> fb;
                for (const auto& [day, ap] : base) {
                    const auto it = hybrid.find(day);
                    if (it == hybrid.end()) continue;
                    actual.push_back(ap.first);
                    fa.push_back(it->second.first / static_cast<double>(it->second.second));
                    fb.push_back(ap.second);
                }
                std::size_t skipped = 0;
                const auto d = loss_differentials(actual, fa, fb, DmLoss::AbsolutePercentage, &skipped);
                if (d.size() < 2) continue;
                TestResult t = dm_test(d, 1);
                report.tests.push_back({c, p, b, "dm", "mape", t.statistic, t.p_value, t.degenerate, 0.0, skipped});
            }
        }
    }
}

std::vector<AggregateRow> aggregate(const EvalReport& report) {
    using Key = std::tuple<std::string, std::string, std::string, double, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<std::pair<std::size_t, double>>> values;
    auto add = [&](Key k, std::size_t trial, double v) {
        auto [it, fresh] = values.try_emplace(k);
        if (fresh) order.push_back(k);
        it->second.emplace_back(trial, v);
    };
    std::set<std::string> countries;
    for (const auto& m : report.metrics) {
        countries.insert(m.country);
        add({m.country, m.model, m.predictand, 0.0, "smape_pct"}, m.trial, 100.0 * m.smape);
        add({m.country, m.model, m.predictand, 0.0, "rmse"}, m.trial, m.rmse);
        add({m.country, m.model, m.predictand, 0.0, "mae"}, m.trial, m.mae);
    }
    for (const auto& r : report.intervals) {
        add({r.country, r.model, r.predictand, r.alpha, "mis"}, r.trial, r.mis);
        add({r.country, r.model, r.predictand, r.alpha, "coverage_pct"}, r.trial, 100.0 * r.coverage);
    }

    std::vector<AggregateRow> out;
    auto push = [&](const Key& k, const std::vector<double>& v) {
        const MeanStd ms = mean_std(v);
        out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k), std::get<4>(k), ms.mean, ms.std});
    };
    for (const auto& k : order) {
        std::vector<double> v;
        for (const auto& [t, x] : values.at(k)) v.push_back(x);
        push(k, v);
    }
    if (countries.size() > 1) {
        // Region: per trial, the mean over countries; then mean/std over trials.
        std::vector<Key> region_order;
        std::map<Key, std::map<std::size_t, std::vector<double>>> by_trial;
        for (const auto& k : order) {
            Key rk{kRegionLabel, std::get<1>(k), std::get<2>(k), std::get<3>(k), std::get<4>(k)};
            auto [it, fresh] = by_trial.try_emplace(rk);
            if (fresh) region_order.push_back(rk);
            for (const auto& [t, x] : values.at(k)) it->second[t].push_back(x);
        }
        for (const auto& rk : region_order) {
            std::vector<double> v;
            for (const auto& [t, xs] : by_trial.at(rk)) v.push_back(mean_std(xs).mean);
            push(rk, v);
        }
    }
    return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw DataError("cannot write " + p.string());
    return os;
}

const AggregateRow* find_agg(const std::vector<AggregateRow>& agg, const std::string& c, const std::string& m,
                             const std::string& p, double a, const std::string& metric) {
    for (const auto& r : agg) {
        if (r.country == c && r.model == m && r.predictand == p && r.alpha == a && r.metric == metric) return &r;
    }
    return nullptr;
}

}  // namespace

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto agg = aggregate(report);

    // Groups in first-appearance order, REGION last.
    using Group = std::tuple<std::string, std::string, std::string>;
    std::vector<Group> groups;
    for (const auto& r : agg) {
        Group g{r.country, r.model, r.predictand};
        if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }

    {
        auto os = open_out(dir / "metrics.csv");
        os << "country,model,predictand,trial,smape_pct,rmse,mae\n";
        for (const auto& m : report.metrics) {
            os << m.country << ',' << m.model << ',' << m.predictand << ',' << m.trial << ','
               << format_number(100.0 * m.smape) << ',' << format_number(m.rmse) << ',' << format_number(m.mae) << '\n';
        }
        for (const auto& [c, m, p] : groups) {
            const auto* s = find_agg(agg, c, m, p, 0.0, "smape_pct");
            if (!s) continue;
            const auto* r = find_agg(agg, c, m, p, 0.0, "rmse");
            const auto* a = find_agg(agg, c, m, p, 0.0, "mae");
            os << c << ',' << m << ',' << p << ",mean," << format_number(s->mean) << ',' << format_number(r->mean)
               << ',' << format_number(a->mean) << '\n';
            os << c << ',' << m << ',' << p << ",std," << format_number(s->std) << ',' << format_number(r->std) << ','
               << format_number(a->std) << '\n';
        }
    }
    {
        auto os = open_out(dir / "intervals.csv");
        os << "country,model,predictand,trial,alpha,mis,coverage_pct\n";
        for (const auto& r : report.intervals) {
            os << r.country << ',' << r.model << ',' << r.predictand << ',' << r.trial << ',' << alpha_label(r.alpha)
               << ',' << format_number(r.mis) << ',' << format_number(100.0 * r.coverage) << '\n';
        }
        for (const auto& [c, m, p] : groups) {
            for (double a : report.alphas) {
                const auto* mi = find_agg(agg, c, m, p, a, "mis");
                if (!mi) continue;
                const auto* cv = find_agg(agg, c, m, p, a, "coverage_pct");
                os << c << ',' << m << ',' << p << ",mean," << alpha_label(a) << ',' << format_number(mi->mean) << ','
                   << format_number(cv->mean) << '\n';
                os << c << ',' << m << ',' << p << ",std," << alpha_label(a) << ',' << format_number(mi->std) << ','
                   << format_number(cv->std) << '\n';
            }
        }
    }
    {
        auto os = open_out(dir / "forecasts.csv");
        os << "country,model,trial,date,predictand,actual,point";
        for (double a : report.alphas) os << ",lower_" << alpha_label(a) << ",upper_" << alpha_label(a);
        os << '\n';
        for (const auto& f : report.forecasts) {
            os << f.country << ',' << f.model << ',' << f.trial << ',' << format_iso_date(f.day) << ',' << f.predictand
               << ',' << format_number(f.actual) << ',' << format_number(f.point);
            for (std::size_t i = 0; i < f.lower.size(); ++i) {
                os << ',' << format_number(f.lower[i]) << ',' << format_number(f.upper[i]);
            }
            os << '\n';
        }
    }
    {
        auto os = open_out(dir / "tests.csv");
        os << "country,predictand,baseline,test,metric,statistic,p_value,degenerate,df,skipped\n";
        for (const auto& t : report.tests) {
            os << t.country << ',' << t.predictand << ',' << t.baseline << ',' << t.test << ',' << t.metric << ','
               << format_number(t.statistic) << ',' << format_number(t.p_value) << ',' << (t.degenerate ? 1 : 0) << ','
               << format_number(t.degrees_of_freedom) << ',' << t.skipped << '\n';
        }
    }
    {
        auto os = open_out(dir / "errors.csv");
        os << "country,trial,divergence,message\n";
        for (const auto& e : report.errors) {
            std::string msg = e.message;
            std::replace(msg.begin(), msg.end(), '"', '\'');
            os << e.country << ',' << e.trial << ',' << (e.divergence ? 1 : 0) << ",\"" << msg << "\"\n";
        }
    }
    if (!report.tuned.empty()) {
        nlohmann::ordered_json j;
        for (const auto& [c, cfg] : report.tuned) j[c] = config_to_json(cfg);
        auto os = open_out(dir / "tuned.json");
        os << j.dump(1) << '\n';
    }
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& p, std::vector<std::string>& header) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot read " + p.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(p.string() + ": empty file");
    header = split_csv_line(line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
        if (rows.back().size() != header.size()) throw DataError(p.string() + ": ragged row");
    }
    return rows;
}

double to_double(const std::string& s) {
    if (s.empty()) return kNaN;
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw DataError("report: non-numeric field '" + s + "'");
    }
}

bool per_trial(const std::string& s) { return !s.empty() && std::all_of(s.begin(), s.end(), ::isdigit); }

}  // namespace

EvalReport read_report(const std::filesystem::path& dir) {
    EvalReport report;
    std::vector<std::string> header;
    std::set<std::size_t> trials;
    for (const auto& r : read_csv_rows(dir / "metrics.csv", header)) {
        if (!per_trial(r[3])) continue;
        const std::size_t t = std::stoul(r[3]);
        trials.insert(t);
        report.metrics.push_back({r[0], r[1], r[2], t, to_double(r[4]) / 100.0, to_double(r[5]), to_double(r[6])});
    }
    std::set<double> alphas;
    for (const auto& r : read_csv_rows(dir / "intervals.csv", header)) {
        if (!per_trial(r[3])) continue;
        const double a = to_double(r[4]);
        alphas.insert(a);
        report.intervals.push_back(
            {r[0], r[1], r[2], std::stoul(r[3]), a, to_double(r[5]), to_double(r[6]) / 100.0});
    }
    report.alphas.assign(alphas.begin(), alphas.end());
    report.trials = trials.size();
    return report;
}

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string safe_name(std::string s) {
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
    }
    return s;
}

struct Svg {
    double width;
    double height;
    std::ostringstream body;

    void text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 11) {
        body << "<text x=\"" << format_number(x) << "\" y=\"" << format_number(y) << "\" font-size=\"" << size
             << "\" text-anchor=\"" << anchor << "\" font-family=\"sans-serif\">" << xml_escape(s) << "</text>\n";
    }
    void rect(double x, double y, double w, double h, const char* fill, const char* stroke = "none") {
        body << "<rect x=\"" << format_number(x) << "\" y=\"" << format_number(y) << "\" width=\"" << format_number(w)
             << "\" height=\"" << format_number(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
    }
    void line(double x1, double y1, double x2, double y2, const char* stroke = "#000") {
        body << "<line x1=\"" << format_number(x1) << "\" y1=\"" << format_number(y1) << "\" x2=\"" << format_number(x2)
             << "\" y2=\"" << format_number(y2) << "\" stroke=\"" << stroke << "\"/>\n";
    }
    void save(const std::filesystem::path& p) const {
        auto os = open_out(p);
        os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_number(width) << "\" height=\""
           << format_number(height) << "\" viewBox=\"0 0 " << format_number(width) << ' ' << format_number(height)
           << "\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << body.str() << "</svg>\n";
    }
};

void axis(Svg& svg, double x0, double y0, double plot_w, double plot_h, double lo, double hi) {
    svg.line(x0, y0, x0, y0 + plot_h);
    svg.line(x0, y0 + plot_h, x0 + plot_w, y0 + plot_h);
    for (int i = 0; i <= 4; ++i) {
        const double v = lo + (hi - lo) * i / 4.0;
        const double y = y0 + plot_h - plot_h * i / 4.0;
        svg.line(x0 - 4, y, x0, y);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        svg.text(x0 - 6, y + 4, buf, "end", 10);
    }
}

std::string metric_title(const std::string& metric, double alpha) {
    return alpha > 0.0 ? metric + " (alpha=" + alpha_label(alpha) + ")" : metric;
}

void bar_chart(const std::filesystem::path& path, const std::string& title, const std::vector<std::string>& groups,
               const std::vector<std::string>& series, const std::vector<std::vector<double>>& values) {
    const double x0 = 60;
    const double y0 = 40;
    const double plot_h = 240;
    const double group_w = std::max(80.0, 30.0 * static_cast<double>(series.size()) + 20.0);
    const double plot_w = group_w * static_cast<double>(groups.size());
    Svg svg{x0 + plot_w + 160, y0 + plot_h + 60, {}};
    double hi = 0.0;
    for (const auto& g : values) {
        for (double v : g) {
            if (std::isfinite(v)) hi = std::max(hi, v);
        }
    }
    if (hi <= 0.0) hi = 1.0;
    svg.text((x0 + plot_w) / 2 + 30, 20, title, "middle", 13);
    axis(svg, x0, y0, plot_w, plot_h, 0.0, hi);
    const double bar_w = (group_w - 20.0) / static_cast<double>(series.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double gx = x0 + group_w * static_cast<double>(g) + 10.0;
        for (std::size_t s = 0; s < series.size(); ++s) {
            const double v = values[g][s];
            if (!std::isfinite(v)) continue;
            const double h = plot_h * v / hi;
            svg.rect(gx + bar_w * static_cast<double>(s), y0 + plot_h - h, bar_w * 0.9, h, kPalette[s % 6]);
        }
        svg.text(gx + (group_w - 20.0) / 2, y0 + plot_h + 18, groups[g]);
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const double ly = y0 + 16.0 * static_cast<double>(s);
        svg.rect(x0 + plot_w + 20, ly, 10, 10, kPalette[s % 6]);
        svg.text(x0 + plot_w + 36, ly + 9, series[s], "start", 11);
    }
    svg.save(path);
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const EvalReport& report, const std::filesystem::path& dir) {
    if (report.empty()) throw ContractError("emit_plots: empty report");
    std::filesystem::create_directories(dir);
    const auto agg = aggregate(report);
    std::vector<std::filesystem::path> written;

    std::vector<std::string> countries;
    std::vector<std::string> models;
    std::vector<std::string> predictands;
    std::vector<std::pair<std::string, double>> metrics;
    auto note = [](auto& v, const auto& x) {
        if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
    };
    for (const auto& r : agg) {
        note(countries, r.country);
        note(models, r.model);
        note(predictands, r.predictand);
        note(metrics, std::make_pair(r.metric, r.alpha));
    }

    // Grouped bars of trial means: predictands x models, one chart per country and metric.
    for (const auto& c : countries) {
        for (const auto& [metric, alpha] : metrics) {
            std::vector<std::vector<double>> values;
            bool any = false;
            for (const auto& p : predictands) {
                std::vector<double> row;
                for (const auto& m : models) {
                    const auto* r = find_agg(agg, c, m, p, alpha, metric);
                    row.push_back(r ? r->mean : kNaN);
                    any = any || r;
                }
                values.push_back(std::move(row));
            }
            if (!any) continue;
            std::string name = "bar_" + metric + (alpha > 0 ? "_" + alpha_label(alpha) : "") + "_" + safe_name(c) + ".svg";
            bar_chart(dir / name, c + ": " + metric_title(metric, alpha), predictands, models, values);
            written.push_back(dir / name);
        }
    }

    // Box plots over trials: one per country, predictand and metric.
    auto trial_values = [&](const std::string& c, const std::string& m, const std::string& p, const std::string& metric,
                            double alpha) {
        std::vector<double> v;
        if (alpha == 0.0) {
            for (const auto& r : report.metrics) {
                if (r.country != c || r.model != m || r.predictand != p) continue;
                v.push_back(metric == "smape_pct" ? 100.0 * r.smape : metric == "rmse" ? r.rmse : r.mae);
            }
        } else {
            for (const auto& r : report.intervals) {
                if (r.country != c || r.model != m || r.predictand != p || r.alpha != alpha) continue;
                v.push_back(metric == "mis" ? r.mis : 100.0 * r.coverage);
            }
        }
        std::sort(v.begin(), v.end());
        return v;
    };
    for (const auto& c : countries) {
        if (c == kRegionLabel) continue;
        for (const auto& p : predictands) {
            for (const auto& [metric, alpha] : metrics) {
                std::vector<std::pair<std::string, std::vector<double>>> boxes;
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                for (const auto& m : models) {
                    auto v = trial_values(c, m, p, metric, alpha);
                    if (v.empty()) continue;
                    lo = std::min(lo, v.front());
                    hi = std::max(hi, v.back());
                    boxes.emplace_back(m, std::move(v));
                }
                if (boxes.empty()) continue;
                if (hi <= lo) {
                    hi = lo + 1.0;
                    lo -= 1.0;
                }
                const double x0 = 60;
                const double y0 = 40;
                const double plot_h = 240;
                const double box_w = 60;
                const double plot_w = 100.0 * static_cast<double>(boxes.size());
                Svg svg{x0 + plot_w + 40, y0 + plot_h + 60, {}};
                svg.text((x0 + plot_w) / 2 + 20, 20, c + " " + p + ": " + metric_title(metric, alpha), "middle", 13);
                axis(svg, x0, y0, plot_w, plot_h, lo, hi);
                auto ymap = [&](double v) { return y0 + plot_h - plot_h * (v - lo) / (hi - lo); };
                for (std::size_t b = 0; b < boxes.size(); ++b) {
                    const auto& v = boxes[b].second;
                    const double cx = x0 + 100.0 * static_cast<double>(b) + 50.0;
                    const double q1 = quantile_sorted(v, 0.25);
                    const double med = quantile_sorted(v, 0.5);
                    const double q3 = quantile_sorted(v, 0.75);
                    svg.line(cx, ymap(v.front()), cx, ymap(v.back()));
                    svg.line(cx - 12, ymap(v.front()), cx + 12, ymap(v.front()));
                    svg.line(cx - 12, ymap(v.back()), cx + 12, ymap(v.back()));
                    svg.rect(cx - box_w / 2, ymap(q3), box_w, std::max(ymap(q1) - ymap(q3), 0.5), kPalette[b % 6], "#000");
                    svg.line(cx - box_w / 2, ymap(med), cx + box_w / 2, ymap(med), "#fff");
                    svg.text(cx, y0 + plot_h + 18, boxes[b].first);
                }
                std::string name = "box_" + metric + (alpha > 0 ? "_" + alpha_label(alpha) : "") + "_" +
                                   safe_name(c) + "_" + safe_name(p) + ".svg";
                svg.save(dir / name);
                written.push_back(dir / name);
            }
        }
    }
    return written;
}

EvalReport evaluate_external(const SeriesFrame& actual, std::istream& forecasts, const std::string& model,
                             const std::string& country) {
    std::string line;
    if (!std::getline(forecasts, line)) throw DataError("external forecasts: empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "date" || header[1] != "predictand" || header[2] != "point") {
        throw DataError("external forecasts: header must start with date,predictand,point");
    }
    std::vector<double> alphas;
    for (std::size_t c = 3; c + 1 < header.size(); c += 2) {
        if (header[c].rfind("lower_", 0) != 0 || header[c + 1].rfind("upper_", 0) != 0 ||
            header[c].substr(6) != header[c + 1].substr(6)) {
            throw DataError("external forecasts: interval columns must come in lower_<a>,upper_<a> pairs");
        }
        alphas.push_back(to_double(header[c].substr(6)));
    }
    if ((header.size() - 3) % 2 != 0) throw DataError("external forecasts: unpaired interval column");

    struct Series {
        std::vector<double> y, point;
        std::vector<std::vector<double>> lo, up;
    };
    std::vector<std::string> order;
    std::map<std::string, Series> by_pred;
    const auto first_day = actual.days().front();
    while (std::getline(forecasts, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) throw DataError("external forecasts: ragged row");
        const std::int64_t day = parse_iso_date(f[0]);
        if (day < first_day || day > actual.days().back()) throw DataError("external forecasts: date " + f[0] + " outside the data");
        const std::size_t col = actual.column_index(f[1]);
        auto [it, fresh] = by_pred.try_emplace(f[1]);
        if (fresh) {
            order.push_back(f[1]);
            it->second.lo.resize(alphas.size());
            it->second.up.resize(alphas.size());
        }
        it->second.y.push_back(actual.values()(static_cast<Eigen::Index>(col), static_cast<Eigen::Index>(day - first_day)));
        it->second.point.push_back(to_double(f[2]));
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            it->second.lo[a].push_back(to_double(f[3 + 2 * a]));
            it->second.up[a].push_back(to_double(f[4 + 2 * a]));
        }
    }
    if (order.empty()) throw DataError("external forecasts: no rows");

    EvalReport report;
    report.alphas = alphas;
    report.trials = 1;
    for (const auto& p : order) {
        const Series& s = by_pred.at(p);
        report.metrics.push_back({country, model, p, 0, smape(s.y, s.point), rmse(s.y, s.point), mae(s.y, s.point)});
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            report.intervals.push_back({country, model, p, 0, alphas[a], mis(s.y, s.lo[a], s.up[a], alphas[a]),
                                        coverage(s.y, s.lo[a], s.up[a])});
        }
    }
    return report;
}

}  // namespace meslstm
