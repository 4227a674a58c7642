#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mcdfn/errors.hpp"
#include "mcdfn/evaluation.hpp"
#include "mcdfn/explain.hpp"
#include "mcdfn/weights.hpp"

namespace py = pybind11;
using namespace mcdfn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    Tensor t(shape);
    std::copy(a.data(), a.data() + a.size(), t.data());
    return t;
}

Array to_array(const Tensor& t) {
    Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

std::span<const double> span_of(const Array& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

WindowSet window_set(const Array& inputs, const Array& targets) {
    WindowSet w;
    w.inputs = to_tensor(inputs);
    w.targets = to_tensor(targets);
    if (w.targets.rank() == 2) w.targets = std::move(w.targets).reshaped({w.targets.dim(0), w.targets.dim(1), 1});
    w.tag = SplitTag::kTest;
    for (std::size_t i = 0; i < w.inputs.dim(0); ++i) w.starts.push_back(i);
    if (w.inputs.rank() == 3) w.input_len = w.inputs.dim(1);
    if (w.targets.rank() == 3) w.horizon = w.targets.dim(1);
    return w;
}

py::dict windows_dict(const WindowSet& w) {
    py::dict d;
    d["inputs"] = to_array(w.inputs);
    d["targets"] = to_array(w.targets);
    d["starts"] = w.starts;
    return d;
}

py::dict metrics_dict(const Metrics& m) {
    py::dict d;
    d["mse"] = m.mse;
    d["rmse"] = m.rmse;
    d["mae"] = m.mae;
    d["mape"] = m.mape;
    d["count"] = m.count;
    d["mape_skipped"] = m.mape_skipped;
    return d;
}

py::dict ttest_dict(const TTestResult& r) {
    py::dict d;
    d["t"] = r.t;
    d["p"] = r.p;
    d["df"] = r.df;
    d["mean_diff"] = r.mean_diff;
    d["sd"] = r.sd;
    d["n"] = r.n;
    return d;
}

py::dict prepared_dict(const PreparedData& p) {
    py::dict d;
    d["train"] = windows_dict(p.train);
    d["val"] = windows_dict(p.val);
    d["test"] = windows_dict(p.test);
    d["features"] = to_array(p.features.values);
    d["mean"] = p.stats.mean;
    d["stddev"] = p.stats.stddev;
    d["splits"] = py::make_tuple(p.splits.train.size(), p.splits.val.size(), p.splits.test.size());
    return d;
}

PreparedData load(const std::string& csv, const std::optional<std::string>& holidays) {
    IngestOptions o;
    if (holidays) o.holidays = *holidays;
    return prepare(csv, o);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "MCDFN demand forecasting toolkit";
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    m.def("model_names", &model_names);

    py::class_<Network>(m, "Network")
        .def_property_readonly("name", &Network::name)
        .def_property_readonly("param_count", &Network::param_count)
        .def("predict",
             [](const Network& net, const Array& windows) {
                 Tensor x = to_tensor(windows);
                 const bool single = x.rank() == 2;
                 if (single) x = std::move(x).reshaped({1, x.dim(0), x.dim(1)});
                 Tensor y = net.predict_batch(x);
                 y = std::move(y).reshaped(single ? Shape{y.dim(1)} : Shape{y.dim(0), y.dim(1)});
                 return to_array(y);
             },
             py::arg("windows"), "Inference on [N, 30, 10] or [30, 10] inputs (standardized scale).")
        .def("save", [](const Network& net, const std::string& path, double mean, double stddev) {
                 save_weights(path, net, {mean, stddev});
             },
             py::arg("path"), py::arg("mean") = 0.0, py::arg("stddev") = 1.0);

    m.def("build", [](const std::string& name, std::uint64_t seed) { return build(name, RandomSource(seed).child("init")); },
          py::arg("name"), py::arg("seed") = 42);
    m.def("load_weights", [](const std::string& path) {
        WeightsFile wf = load_weights(path);
        return py::make_tuple(py::cast(std::move(wf.net)), wf.stats.mean, wf.stats.stddev);
    });

    m.def("prepare", [](const std::string& csv, const std::optional<std::string>& holidays) {
        return prepared_dict(load(csv, holidays));
    }, py::arg("csv"), py::arg("holidays") = py::none());

    m.def("train",
          [](const std::string& model, const std::string& csv, const std::optional<std::string>& holidays,
             std::size_t epochs, std::size_t patience, std::size_t batch_size, double learning_rate, std::uint64_t seed) {
              const PreparedData d = load(csv, holidays);
              TrainConfig cfg;
              cfg.epochs = epochs;
              cfg.patience = patience;
              cfg.batch_size = batch_size;
              cfg.learning_rate = learning_rate;
              cfg.seed = seed;
              TrainReport r;
              Network net = build_and_fit(model, d.train, d.val, cfg, &r);
              py::list history;
              for (const auto& e : r.history) history.append(py::make_tuple(e.epoch, e.train_loss, e.val_loss));
              const MetricsRow test = evaluate_split(net, d.test, d.stats, net.name());
              py::dict out;
              out["network"] = py::cast(std::move(net));
              out["history"] = history;
              out["best_epoch"] = r.best_epoch;
              out["test"] = metrics_dict(test.metrics);
              out["test_theils_u"] = test.theils_u;
              return out;
          },
          py::arg("model"), py::arg("csv"), py::arg("holidays") = py::none(), py::arg("epochs") = 50,
          py::arg("patience") = 100, py::arg("batch_size") = 32, py::arg("learning_rate") = 1e-3,
          py::arg("seed") = 42);

    m.def("metrics", [](const Array& y, const Array& yhat) { return metrics_dict(metrics(span_of(y), span_of(yhat))); });
    m.def("theils_u", [](const Array& y, const Array& yhat) { return theils_u(span_of(y), span_of(yhat)); });
    m.def("student_t_cdf", &student_t_cdf, py::arg("t"), py::arg("df"));
    m.def("student_t_two_sided_p", &student_t_two_sided_p, py::arg("t"), py::arg("df"));
    m.def("paired_ttest", [](const Array& a, const Array& b) { return ttest_dict(paired_ttest(span_of(a), span_of(b))); });
    m.def("prediction_ttest", [](const Network& net, const Array& inputs, const Array& targets) {
        const PredictionTTest r = prediction_ttest(net, window_set(inputs, targets));
        py::dict d;
        d["mean_t"] = r.mean_t;
        d["mean_p"] = r.mean_p;
        d["windows"] = r.windows;
        d["excluded"] = r.excluded;
        return d;
    });

    m.def("shaptime",
          [](const Network& net, const Array& window, const Array& baseline, std::size_t n_super) {
              const ShapReport r = shaptime(net, to_tensor(window), to_tensor(baseline), n_super);
              py::dict d;
              d["phi"] = r.phi;
              d["heatmap"] = to_array(r.heatmap);
              d["baseline"] = r.baseline_prediction;
              d["prediction"] = r.explained_prediction;
              d["residual"] = r.residual;
              return d;
          },
          py::arg("net"), py::arg("window"), py::arg("baseline"), py::arg("n_super") = 10);
    m.def("pfi",
          [](const Network& net, const Array& inputs, const Array& targets, std::size_t repetitions, std::uint64_t seed,
             double mean, double stddev) {
              const PfiReport r = pfi_all(net, window_set(inputs, targets), {mean, stddev}, repetitions, seed);
              py::list rows;
              for (const auto& e : r.entries) {
                  py::dict d;
                  d["feature"] = e.name;
                  d["permuted_mse"] = e.permuted_mse;
                  d["error_increase"] = e.error_increase;
                  d["paper_score"] = e.paper_score;
                  rows.append(d);
              }
              return py::make_tuple(r.base_mse, rows);
          },
          py::arg("net"), py::arg("inputs"), py::arg("targets"), py::arg("repetitions") = 5, py::arg("seed") = 42,
          py::arg("mean") = 0.0, py::arg("stddev") = 1.0);

    m.def("generate_synthetic", [](const std::string& csv, const std::optional<std::string>& holidays, std::uint64_t seed) {
        SyntheticOptions o;
        o.seed = seed;
        const SyntheticSeries s = generate_synthetic(o);
        write_series_csv(csv, s.table);
        if (holidays) write_holidays(*holidays, s.holidays);
        return s.table.size();
    }, py::arg("csv"), py::arg("holidays") = py::none(), py::arg("seed") = 2013);
}
