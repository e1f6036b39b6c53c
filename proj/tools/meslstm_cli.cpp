// Command-line front end: ingest, tune, fit, forecast, evaluate, experiment, plot.

#include "meslstm/error.hpp"
#include "meslstm/experiment.hpp"
#include "meslstm/ingest.hpp"
#include "meslstm/pipeline.hpp"
#include "meslstm/random.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace meslstm;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kDivergence = 3 };

struct Common {
    std::string config;
    std::string data;
    std::string country;
    std::size_t trials = 0;
    std::int64_t seed = -1;
    std::string out;
    std::string alpha;
    std::size_t jobs = 0;
};

std::vector<double> parse_alphas(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ContractError("--alpha: '" + item + "' is not a number");
        }
    }
    return out;
}

/// The config file (when given) with command-line overrides applied.
ExperimentSpec resolve_spec(const Common& c) {
    ExperimentSpec spec = c.config.empty() ? ExperimentSpec{} : load_experiment(c.config);
    if (!c.data.empty()) spec.data.path = c.data;
    if (!c.country.empty()) spec.data.countries = {c.country};
    if (c.trials > 0) spec.trials = c.trials;
    if (c.seed >= 0) spec.seed = static_cast<std::uint64_t>(c.seed);
    if (!c.out.empty()) spec.out = c.out;
    if (!c.alpha.empty()) spec.alphas = parse_alphas(c.alpha);
    if (c.jobs > 0) spec.jobs = c.jobs;
    spec.model.alphas = spec.alphas;
    spec.model.seed = spec.seed;
    if (spec.data.path.empty()) throw ContractError("no data file: pass --data or set data.path in --config");
    return spec;
}

IngestSpec ingest_spec(const ExperimentSpec& spec, const std::string& country) {
    IngestSpec s;
    s.path = spec.data.path;
    s.country = country;
    s.features = spec.data.features;
    s.predictands = spec.data.predictands;
    s.fill = spec.data.fill;
    s.drop_per_capita = spec.data.drop_per_capita;
    return s;
}

std::string single_country(const ExperimentSpec& spec) {
    if (spec.data.countries.size() != 1) throw ContractError("this command needs exactly one country (--country)");
    return spec.data.countries.front();
}

LoadResult load_country(const ExperimentSpec& spec) {
    LoadResult r = load(ingest_spec(spec, single_country(spec)));
    for (const auto& w : r.warnings) std::cerr << "warning: " << r.location << ": " << w << '\n';
    return r;
}

int cmd_ingest(const Common& c) {
    const ExperimentSpec spec = resolve_spec(c);
    const LoadResult r = load_country(spec);
    if (c.out.empty()) {
        write_frame_csv(std::cout, r.frame);
    } else {
        const std::filesystem::path out = c.out;
        if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
        std::ofstream os(out);
        if (!os) throw DataError("cannot write " + c.out);
        write_frame_csv(os, r.frame);
        std::cout << r.location << ": " << r.frame.length() << " days x " << r.frame.covariates() << " columns -> "
                  << c.out << '\n';
    }
    return kOk;
}

int cmd_tune(const Common& c, bool full_grid) {
    const ExperimentSpec spec = resolve_spec(c);
    const LoadResult r = load_country(spec);
    GridSpec grid = full_grid || !spec.grid ? GridSpec::full() : *spec.grid;
    grid.base = spec.model;
    const std::size_t widest = *std::max_element(grid.windows.begin(), grid.windows.end());
    const Partitions parts = split(r.frame, spec.split, widest);
    const GridOutcome outcome = grid_search(parts.train, parts.validation, grid, spec.jobs);

    std::filesystem::create_directories(spec.out);
    std::ofstream os(spec.out / "grid.csv");
    os << "lstm_size,epochs,batch_size,window,parameters,validation_smape_pct,error\n";
    for (const auto& e : outcome.entries) {
        os << e.config.lstm_size << ',' << e.config.epochs << ',' << e.config.batch_size << ',' << e.config.window << ','
           << e.parameters << ',' << format_number(100.0 * e.validation_smape) << ",\"" << e.error << "\"\n";
    }
    std::ofstream best(spec.out / "best.json");
    best << config_to_json(outcome.best).dump(1) << '\n';
    std::cout << "best: S=" << outcome.best.lstm_size << " epochs=" << outcome.best.epochs
              << " batch=" << outcome.best.batch_size << " window=" << outcome.best.window << '\n';
    return kOk;
}

int cmd_fit(const Common& c) {
    const ExperimentSpec spec = resolve_spec(c);
    const LoadResult r = load_country(spec);
    const Partitions parts = split(r.frame, spec.split, spec.model.window);
    const FittedModel model = extend(fit(parts.train, parts.validation, spec.model), parts.validation);
    const std::filesystem::path dir = c.out.empty() ? std::filesystem::path("model") : std::filesystem::path(c.out);
    save_model(model, dir);
    std::cout << "trained on " << parts.train.length() << " days (" << model.training_examples << " windows), "
              << "last point-loss " << format_number(model.diagnostics.back().point_train) << ", saved to "
              << dir.string() << '\n';
    return kOk;
}

int cmd_forecast(const Common& c, const std::string& model_dir) {
    const ExperimentSpec spec = resolve_spec(c);
    const LoadResult r = load_country(spec);
    FittedModel model = load_model(model_dir);
    const std::int64_t last = model.last_day();
    const auto& days = r.frame.days();
    if (days.back() > last) {
        const auto first_new = static_cast<std::size_t>(std::find(days.begin(), days.end(), last + 1) - days.begin());
        if (first_new >= days.size()) throw DataError("data does not continue the model's history");
        model = extend(std::move(model), r.frame.slice(first_new, r.frame.length()));
    }
    const ForecastResult f = predict(model, r.frame.tail(model.window()), derive_seed(spec.seed, 0, "forecast"));

    std::ofstream file;
    if (!c.out.empty()) {
        const std::filesystem::path out = c.out;
        if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
        file.open(out);
        if (!file) throw DataError("cannot write " + c.out);
    }
    std::ostream& os = c.out.empty() ? std::cout : file;
    os << "date,predictand,point";
    for (const auto& iv : f.intervals) os << ",lower_" << format_number(iv.alpha) << ",upper_" << format_number(iv.alpha);
    os << '\n';
    for (std::size_t p = 0; p < model.predictands(); ++p) {
        const auto pi = static_cast<Eigen::Index>(p);
        for (std::size_t h = 0; h < f.days.size(); ++h) {
            const auto hi = static_cast<Eigen::Index>(h);
            os << format_iso_date(f.days[h]) << ',' << model.column_names[model.predictand_indices[p]] << ','
               << format_number(f.point(pi, hi));
            for (const auto& iv : f.intervals) os << ',' << format_number(iv.lower(pi, hi)) << ',' << format_number(iv.upper(pi, hi));
            os << '\n';
        }
    }
    return kOk;
}

int cmd_evaluate(const Common& c, const std::string& forecasts, const std::string& label) {
    const ExperimentSpec spec = resolve_spec(c);
    const LoadResult r = load_country(spec);
    std::ifstream in(forecasts);
    if (!in) throw DataError("cannot read " + forecasts);
    const EvalReport report = evaluate_external(r.frame, in, label, r.location);
    write_report(report, spec.out);
    for (const auto& m : report.metrics) {
        std::cout << m.predictand << ": sMAPE " << format_number(100.0 * m.smape) << "%, RMSE " << format_number(m.rmse)
                  << '\n';
    }
    return kOk;
}

int cmd_experiment(const Common& c) {
    const ExperimentSpec spec = resolve_spec(c);
    const EvalReport report = run_experiment(spec);
    write_report(report, spec.out);
    for (const auto& e : report.errors) {
        std::cerr << "trial failed: " << e.country << " #" << e.trial << ": " << e.message << '\n';
    }
    std::cout << report.metrics.size() << " metric rows, " << report.errors.size() << " failed trial(s) -> "
              << spec.out.string() << '\n';
    return kOk;
}

int cmd_plot(const std::string& report_dir, const std::string& out) {
    const EvalReport report = read_report(report_dir);
    const auto files = emit_plots(report, out.empty() ? std::filesystem::path(report_dir) / "plots" : std::filesystem::path(out));
    std::cout << files.size() << " plot(s) written\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid exponential-smoothing / LSTM forecaster"};
    app.require_subcommand(1);
    Common c;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", c.config, "Experiment config (JSON)");
        sub->add_option("--data", c.data, "OWID-schema CSV (overrides the config)");
        sub->add_option("--country", c.country, "Country / location name");
        sub->add_option("--seed", c.seed, "Root seed");
        sub->add_option("--out", c.out, "Output file or directory");
        sub->add_option("--alpha", c.alpha, "Comma-separated significance levels");
        sub->add_option("--jobs", c.jobs, "Worker threads");
    };

    auto* ingest = app.add_subcommand("ingest", "Load one country and dump the normalized frame");
    add_common(ingest);
    auto* tune = app.add_subcommand("tune", "Grid search on the validation split");
    add_common(tune);
    bool full_grid = false;
    tune->add_flag("--full-grid", full_grid, "Use the full search space instead of the config grid");
    auto* fitc = app.add_subcommand("fit", "Train a model and save it");
    add_common(fitc);
    auto* forecast = app.add_subcommand("forecast", "Forecast the window after the data's last day");
    add_common(forecast);
    std::string model_dir;
    forecast->add_option("--model", model_dir, "Saved model directory")->required();
    auto* evaluate = app.add_subcommand("evaluate", "Score an external forecast CSV");
    add_common(evaluate);
    std::string forecasts;
    std::string label = "external";
    evaluate->add_option("--forecasts", forecasts, "CSV: date,predictand,point,lower_<a>,upper_<a>...")->required();
    evaluate->add_option("--label", label, "Model label in the report");
    auto* experiment = app.add_subcommand("experiment", "Repeated trials against the baselines");
    add_common(experiment);
    experiment->add_option("--trials", c.trials, "Number of trials");
    auto* plot = app.add_subcommand("plot", "SVG charts from an experiment's output");
    std::string report_dir;
    std::string plot_out;
    plot->add_option("--report", report_dir, "Experiment output directory")->required();
    plot->add_option("--out", plot_out, "Plot directory (default <report>/plots)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*ingest) return cmd_ingest(c);
        if (*tune) return cmd_tune(c, full_grid);
        if (*fitc) return cmd_fit(c);
        if (*forecast) return cmd_forecast(c, model_dir);
        if (*evaluate) return cmd_evaluate(c, forecasts, label);
        if (*experiment) return cmd_experiment(c);
        if (*plot) return cmd_plot(report_dir, plot_out);
    } catch (const TrainingDivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDivergence;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
