// Python module _meslstm: frames, ingestion, metrics, fit/predict and the
// experiment runner.

#include "meslstm/error.hpp"
#include "meslstm/experiment.hpp"
#include "meslstm/ingest.hpp"
#include "meslstm/metrics.hpp"
#include "meslstm/pipeline.hpp"
#include "meslstm/variational.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace meslstm;

namespace {

py::dict test_dict(const TestResult& r) {
    py::dict d;
    d["statistic"] = r.statistic;
    d["p_value"] = r.p_value;
    d["degenerate"] = r.degenerate;
    d["df"] = r.degrees_of_freedom;
    d["skipped"] = r.skipped;
    return d;
}

FillPolicy fill_from(const std::string& s) {
    if (s == "default") return FillPolicy::Default;
    if (s == "forward") return FillPolicy::ForwardOnly;
    throw ContractError("fill must be 'default' or 'forward'");
}

}  // namespace

PYBIND11_MODULE(_meslstm, m) {
    m.doc() = "Hybrid exponential smoothing and LSTM forecaster";

    // Later registrations are tried first, so subclasses follow their bases.
    auto& base = py::register_exception<Error>(m, "Error");
    auto& insufficient = py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
    py::register_exception<SizingError>(m, "SizingError", insufficient.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ContractError>(m, "ContractError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<TrainingDivergenceError>(m, "TrainingDivergenceError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());

    py::class_<SeriesFrame>(m, "Frame")
        .def(py::init<std::vector<std::int64_t>, Eigen::MatrixXd, std::vector<std::string>, std::vector<std::size_t>>(),
             py::arg("days"), py::arg("values"), py::arg("names"), py::arg("predictands"))
        .def_property_readonly("days", &SeriesFrame::days)
        .def_property_readonly("values", &SeriesFrame::values)
        .def_property_readonly("names", &SeriesFrame::column_names)
        .def_property_readonly("predictand_indices", &SeriesFrame::predictand_indices)
        .def("__len__", &SeriesFrame::length)
        .def("slice", &SeriesFrame::slice, py::arg("begin"), py::arg("end"))
        .def("tail", &SeriesFrame::tail, py::arg("n"))
        .def("concat", &SeriesFrame::concat, py::arg("later"))
        .def("__eq__", &SeriesFrame::operator==);

    m.def("parse_iso_date", [](const std::string& s) { return parse_iso_date(s); });
    m.def("format_iso_date", &format_iso_date);
    m.def("sadc_countries", &sadc_countries);
    m.def("default_features", &default_features);

    m.def(
        "load_owid",
        [](const std::filesystem::path& path, const std::string& country, std::optional<std::vector<std::string>> features,
           std::optional<std::vector<std::string>> predictands, const std::string& fill, bool drop_per_capita) {
            IngestSpec s;
            s.path = path;
            s.country = country;
            if (features) s.features = *features;
            if (predictands) s.predictands = *predictands;
            s.fill = fill_from(fill);
            s.drop_per_capita = drop_per_capita;
            LoadResult r = load(s);
            return py::make_tuple(r.frame, r.location, r.warnings);
        },
        py::arg("path"), py::arg("country"), py::arg("features") = py::none(), py::arg("predictands") = py::none(),
        py::arg("fill") = "default", py::arg("drop_per_capita") = false,
        "Returns (frame, matched location name, warnings).");

    m.def("smape", [](std::vector<double> y, std::vector<double> f) { return smape(y, f); });
    m.def("rmse", [](std::vector<double> y, std::vector<double> f) { return rmse(y, f); });
    m.def("mae", [](std::vector<double> y, std::vector<double> f) { return mae(y, f); });
    m.def("mis", [](std::vector<double> y, std::vector<double> lo, std::vector<double> hi, double alpha) {
        return mis(y, lo, hi, alpha);
    });
    m.def("coverage", [](std::vector<double> y, std::vector<double> lo, std::vector<double> hi) {
        return coverage(y, lo, hi);
    });
    m.def("t_test_one_sided", [](std::vector<double> a, std::vector<double> b) { return test_dict(t_test_one_sided(a, b)); });
    m.def(
        "dm_test",
        [](std::vector<double> y, std::vector<double> a, std::vector<double> b, std::size_t horizon) {
            return test_dict(dm_test(y, a, b, DmLoss::AbsolutePercentage, horizon));
        },
        py::arg("actual"), py::arg("forecast_a"), py::arg("forecast_b"), py::arg("horizon") = 1);
    m.def("percentile_pair", &percentile_pair);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("lstm_size", &ModelConfig::lstm_size)
        .def_readwrite("epochs", &ModelConfig::epochs)
        .def_readwrite("batch_size", &ModelConfig::batch_size)
        .def_readwrite("window", &ModelConfig::window)
        .def_readwrite("mc_samples", &ModelConfig::mc_samples)
        .def_readwrite("alphas", &ModelConfig::alphas)
        .def_readwrite("seed", &ModelConfig::seed)
        .def("to_json", [](const ModelConfig& c) { return config_to_json(c).dump(); })
        .def_static("from_json", [](const std::string& s) { return config_from_json(nlohmann::ordered_json::parse(s)); });

    m.def(
        "split",
        [](const SeriesFrame& f, std::size_t window, double train, double validation, double test) {
            const Partitions p = split(f, SplitSpec{train, validation, test}, window);
            return py::make_tuple(p.train, p.validation, p.test);
        },
        py::arg("frame"), py::arg("window"), py::arg("train") = 0.75, py::arg("validation") = 0.15,
        py::arg("test") = 0.10);

    py::class_<FittedModel>(m, "FittedModel")
        .def_property_readonly("window", &FittedModel::window)
        .def_property_readonly("last_day", &FittedModel::last_day)
        .def_property_readonly("config", [](const FittedModel& f) { return f.config; })
        .def_property_readonly("kinds",
                               [](const FittedModel& f) {
                                   std::vector<std::string> out;
                                   for (auto k : f.kinds) out.push_back(to_string(k));
                                   return out;
                               })
        .def_property_readonly("point_train_loss",
                               [](const FittedModel& f) {
                                   std::vector<double> v;
                                   for (const auto& d : f.diagnostics) v.push_back(d.point_train);
                                   return v;
                               })
        .def("save", [](const FittedModel& f, const std::filesystem::path& dir) { save_model(f, dir); })
        .def_static("load", [](const std::filesystem::path& dir) { return load_model(dir); });

    m.def("fit", &fit, py::arg("train"), py::arg("validation"), py::arg("config"),
          py::call_guard<py::gil_scoped_release>());
    m.def("extend", &extend, py::arg("model"), py::arg("later"), py::call_guard<py::gil_scoped_release>());
    m.def(
        "predict",
        [](const FittedModel& model, const SeriesFrame& context, std::uint64_t seed) {
            ForecastResult r;
            {
                py::gil_scoped_release release;
                r = predict(model, context, seed);
            }
            py::dict intervals;
            for (const auto& iv : r.intervals) intervals[py::float_(iv.alpha)] = py::make_tuple(iv.lower, iv.upper);
            py::dict out;
            out["days"] = r.days;
            out["point"] = r.point;
            out["intervals"] = intervals;
            return out;
        },
        py::arg("model"), py::arg("context"), py::arg("seed") = 0,
        "Returns {'days', 'point' (j x m), 'intervals': {alpha: (lower, upper)}}.");

    m.def(
        "run_experiment",
        [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
            ExperimentSpec spec = load_experiment(config);
            if (out) spec.out = *out;
            {
                py::gil_scoped_release release;
                write_report(run_experiment(spec), spec.out);
            }
            return spec.out;
        },
        py::arg("config"), py::arg("out") = py::none(), "Runs an experiment config and returns the report directory.");
}
