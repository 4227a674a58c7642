#include <charconv>
#include <cstdlib>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "cli_support.hpp"
#include "mcdfn/errors.hpp"
#include "mcdfn/evaluation.hpp"
#include "mcdfn/explain.hpp"
#include "mcdfn/io.hpp"
#include "mcdfn/weights.hpp"

using namespace mcdfn;
using namespace mcdfn::cli;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct Common {
    DataOptions data;
    TrainOptions train;
    std::string out = "out";
    bool seed_given = false;

    TrainConfig config() const { return resolve_train_config(train, seed_given); }
};

void add_data(CLI::App* app, Common& c) {
    app->add_option("--data", c.data.data, "Daily sales CSV (date,sales[,is_holiday])")->required();
    app->add_option("--holidays", c.data.holidays, "Holiday calendar, one YYYY-MM-DD per line");
    app->add_flag("--fill-gaps", c.data.fill_gaps, "Forward-fill missing days instead of rejecting them");
}

void add_train(CLI::App* app, Common& c) {
    app->add_option("--config", c.train.config, "JSON file with training fields");
    app->add_option("--seed", c.train.seed, std::string("Seed (default from ") + kSeedEnv + " or 42)")
        ->each([&c](const std::string&) { c.seed_given = true; });
    app->add_option("--epochs", c.train.epochs, "Maximum epochs");
    app->add_option("--batch-size", c.train.batch_size, "Mini-batch size");
    app->add_option("--lr", c.train.learning_rate, "Adam learning rate");
    app->add_option("--patience", c.train.patience, "Early-stopping patience in epochs");
}

void add_out(CLI::App* app, Common& c) { app->add_option("--out", c.out, "Output directory"); }

const WindowSet& split_windows(const PreparedData& d, const std::string& split) {
    if (split == "train") return d.train;
    if (split == "val") return d.val;
    if (split == "test") return d.test;
    fail(ErrorKind::kConfig, "unknown split '" + split + "' (expected train, val or test)");
}

void report(const std::string& title, const std::string& csv) { std::cout << title << "\n" << pretty_table(csv); }

std::pair<std::size_t, std::size_t> parse_swap(const std::string& text) {
    const auto colon = text.find(':');
    std::size_t a = 0, b = 0;
    auto number = [](std::string_view s, std::size_t& v) {
        if (!s.empty() && (s.front() == 't' || s.front() == 'T')) s.remove_prefix(1);
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        return ec == std::errc{} && p == s.data() + s.size() && !s.empty();
    };
    if (colon == std::string::npos || !number(std::string_view(text).substr(0, colon), a) ||
        !number(std::string_view(text).substr(colon + 1), b)) {
        fail(ErrorKind::kConfig, "swap '" + text + "' must look like 1:6");
    }
    return {a, b};
}

Network network_for(const std::string& model, const std::string& tuned, const TrainConfig& cfg, json& echo) {
    const RandomSource init = RandomSource(cfg.seed).child("init");
    if (tuned.empty()) {
        echo["model"] = canonical_model_name(model);
        return build(model, init);
    }
    json best;
    try {
        best = json::parse(read_file(tuned));
    } catch (const json::exception& e) {
        fail(ErrorKind::kConfig, tuned + ": " + e.what());
    }
    const std::string family = best.value("model", model);
    HyperConfig hc;
    for (const auto& [k, v] : best.at("config").items()) hc[k] = v.get<double>();
    echo["model"] = canonical_model_name(family);
    echo["tuned"] = best.at("config");
    Network net(spec_from_config(canonical_model_name(family), hc));
    net.init(init);
    return net;
}

int run_prepare(Common& c) {
    const PreparedData d = load_data(c.data);
    RunManifest m("prepare", c.out);
    m.config()["inputs"] = data_json(c.data);
    for (const WindowSet* w : {&d.train, &d.val, &d.test}) {
        const std::string stem = to_string(w->tag);
        save_windows(m.path(stem), *w, d.stats);
        m.record(stem + ".bin");
        m.record(stem + ".json");
    }
    CsvTable features({"date", "sales", "sales_z", "is_holiday", "day_sin", "day_cos", "week_sin", "week_cos",
                       "month_sin", "month_cos", "year_sin", "year_cos"});
    for (std::size_t r = 0; r < d.features.rows(); ++r) {
        std::vector<std::string> row{format_date(d.features.dates[r]), format_double(d.features.raw_sales[r])};
        for (std::size_t f = 0; f < kFeatureCount; ++f) row.push_back(format_double(d.features.values.at(r, f)));
        features.add_row(std::move(row));
    }
    m.write("features.csv", features.str());
    CsvTable splits({"split", "begin", "end", "rows", "windows"});
    const std::pair<const char*, std::pair<RowRange, std::size_t>> parts[] = {
        {"train", {d.splits.train, d.train.size()}},
        {"val", {d.splits.val, d.val.size()}},
        {"test", {d.splits.test, d.test.size()}}};
    for (const auto& [name, info] : parts) {
        splits.add_row({name, std::to_string(info.first.begin), std::to_string(info.first.end),
                        std::to_string(info.first.size()), std::to_string(info.second)});
    }
    m.write("splits.csv", splits.str());
    m.config()["stats"] = {{"mean", d.stats.mean}, {"stddev", d.stats.stddev}};
    m.finish();
    std::cout << "rows " << d.features.rows() << "\n";
    report("splits", splits.str());
    std::cout << "stats mean " << format_double(d.stats.mean) << " stddev " << format_double(d.stats.stddev) << "\n";
    return 0;
}

int run_train(Common& c, const std::string& model, const std::string& tuned, std::size_t value_bits) {
    const TrainConfig cfg = c.config();
    const PreparedData d = load_data(c.data);
    RunManifest m("train", c.out);
    json& conf = m.config();
    Network net = network_for(model, tuned, cfg, conf);
    conf["train"] = train_config_json(cfg);
    conf["inputs"] = data_json(c.data);
    conf["value_bits"] = value_bits;
    std::cout << "training " << net.name() << " (" << net.param_count() << " parameters)\n";
    const TrainReport tr = fit(net, d.train, d.val, cfg, [](const EpochRecord& e) {
        std::cout << "epoch " << e.epoch << " train " << format_fixed(e.train_loss, 6) << " val "
                  << format_fixed(e.val_loss, 6) << "\n";
    });
    m.write("weights.mcdfn", encode_weights(net, d.stats, conf.dump(), value_bits));
    m.write("loss.csv", tr.loss_csv());
    conf["best_epoch"] = tr.best_epoch;
    conf["best_val_loss"] = tr.best_val_loss;
    conf["early_stopped"] = tr.early_stopped;
    conf["param_count"] = net.param_count();
    m.finish();
    std::cout << "best epoch " << tr.best_epoch << " val loss " << format_double(tr.best_val_loss) << "\n";
    return 0;
}

WeightsFile open_weights(const std::string& path) {
    if (path.empty()) fail(ErrorKind::kConfig, "--weights is required");
    if (!fs::exists(path)) fail(ErrorKind::kIo, "weights file '" + path + "' does not exist");
    return load_weights(path);
}

int run_evaluate(Common& c, const std::string& weights, const std::string& split) {
    const WeightsFile wf = open_weights(weights);
    const PreparedData d = load_data(c.data);
    RunManifest m("evaluate", c.out);
    m.config()["weights"] = {{"path", weights}, {"fnv1a64", hash_file(weights)}};
    m.config()["inputs"] = data_json(c.data);
    m.config()["split"] = split;
    std::vector<MetricsRow> rows;
    const std::vector<std::string> splits =
        split == "all" ? std::vector<std::string>{"train", "val", "test"} : std::vector<std::string>{split};
    for (const auto& s : splits) rows.push_back(evaluate_split(wf.net, split_windows(d, s), d.stats, wf.net.name()));
    const std::string csv = metrics_csv(rows);
    m.write("metrics.csv", csv);
    m.finish();
    report("metrics", csv);
    return 0;
}

int run_benchmark(Common& c, std::vector<std::string> models) {
    const TrainConfig cfg = c.config();
    const PreparedData d = load_data(c.data);
    if (models.empty()) models = model_names();
    for (auto& name : models) name = canonical_model_name(name);
    RunManifest m("benchmark", c.out);
    m.config()["models"] = models;
    m.config()["train"] = train_config_json(cfg);
    m.config()["inputs"] = data_json(c.data);
    const BenchmarkReport rep = benchmark(models, d, cfg, [](const std::string& name) {
        std::cout << "training " << name << std::endl;
    });
    m.write("metrics.csv", metrics_csv(rep.rows));
    m.write("efficiency.csv", rep.efficiency_csv());
    for (std::size_t i = 0; i < models.size(); ++i) m.write("loss_" + models[i] + ".csv", rep.training[i].loss_csv());
    m.finish();
    report("metrics", metrics_csv(rep.rows));
    report("efficiency", rep.efficiency_csv());
    return 0;
}

int run_ablate(Common& c) {
    const TrainConfig cfg = c.config();
    const PreparedData d = load_data(c.data);
    RunManifest m("ablate", c.out);
    m.config()["train"] = train_config_json(cfg);
    m.config()["inputs"] = data_json(c.data);
    const AblationReport rep = ablation_run(d, cfg, [](const std::string& name) {
        std::cout << "training " << name << std::endl;
    });
    m.write("ablation.csv", rep.csv());
    m.finish();
    report("ablation", rep.csv());
    return 0;
}

int run_tune(Common& c, const std::string& model, HyperbandOptions hb) {
    const TrainConfig cfg = c.config();
    const PreparedData d = load_data(c.data);
    const std::string family = canonical_model_name(model);
    hb.seed = cfg.seed;
    RunManifest m("tune", c.out);
    m.config()["model"] = family;
    m.config()["train"] = train_config_json(cfg);
    m.config()["hyperband"] = {{"max_epochs", hb.max_epochs}, {"eta", hb.eta}, {"iterations", hb.iterations}};
    m.config()["inputs"] = data_json(c.data);
    const SearchSpace space = default_search_space(family);
    const TuneResult r = hyperband_tune(family, d.train, d.val, cfg, hb);
    m.write("trials.csv", r.ledger_csv(space));
    json best = {{"model", family}, {"config", r.best}, {"config_id", r.best_config_id},
                 {"val_mse", r.best_val_mse}, {"describe", space.describe(r.best)}};
    m.write("best.json", best.dump(2) + "\n");
    m.finish();
    std::cout << r.trials.size() << " trials; best " << space.describe(r.best) << " val mse "
              << format_double(r.best_val_mse) << "\n";
    return 0;
}

int run_predict(Common& c, const std::string& weights, const std::string& split, long window) {
    const WeightsFile wf = open_weights(weights);
    const PreparedData d = load_data(c.data);
    const WindowSet& ws = split_windows(d, split);
    const long n = static_cast<long>(ws.size());
    const long idx = window < 0 ? n + window : window;
    if (idx < 0 || idx >= n) fail(ErrorKind::kConfig, "window " + std::to_string(window) + " out of range for " +
                                                          std::to_string(n) + " windows");
    const WindowSet one = ws.subset({static_cast<std::size_t>(idx)});
    const Forecast f = forecast(wf.net, one, d.stats);
    RunManifest m("predict", c.out);
    m.config()["weights"] = {{"path", weights}, {"fnv1a64", hash_file(weights)}};
    m.config()["inputs"] = data_json(c.data);
    m.config()["split"] = split;
    m.config()["window"] = idx;
    CsvTable csv({"step", "date", "actual", "predicted"});
    const std::size_t first = one.starts[0] + one.input_len;
    for (std::size_t h = 0; h < one.horizon; ++h) {
        csv.add_row({std::to_string(h + 1), format_date(d.features.dates[first + h]), format_double(f.truth[h]),
                     format_double(f.pred[h])});
    }
    m.write("forecast.csv", csv.str());
    m.finish();
    report("forecast", csv.str());
    return 0;
}

std::vector<std::size_t> spread(std::size_t available, std::size_t count) {
    count = std::min(count, available);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < count; ++i) idx.push_back(i * available / count);
    return idx;
}

struct ExplainOptions {
    std::string weights;
    std::size_t n_super = 10;
    long window = 0;
    std::size_t summary_windows = 0;
    std::size_t repetitions = 5;
    std::vector<std::string> swaps;
};

int run_shaptime(Common& c, const ExplainOptions& o) {
    const WeightsFile wf = open_weights(o.weights);
    const PreparedData d = load_data(c.data);
    const Tensor baseline = training_baseline(d.features, d.splits.train);
    const long n = static_cast<long>(d.test.size());
    const long idx = o.window < 0 ? n + o.window : o.window;
    if (idx < 0 || idx >= n) fail(ErrorKind::kConfig, "window " + std::to_string(o.window) + " out of range");
    const WindowSet one = d.test.subset({static_cast<std::size_t>(idx)});
    const ShapReport r = shaptime(wf.net, one.inputs.reshaped({one.input_len, kFeatureCount}), baseline, o.n_super);
    RunManifest m("explain shaptime", c.out);
    m.config()["weights"] = {{"path", o.weights}, {"fnv1a64", hash_file(o.weights)}};
    m.config()["inputs"] = data_json(c.data);
    m.config()["super_times"] = o.n_super;
    m.config()["window"] = idx;
    m.write("shaptime_vector.csv", r.vector_csv());
    m.write("shaptime_heatmap.csv", r.heatmap_csv());
    if (o.summary_windows) {
        const ShapSummary s = shaptime_summary(wf.net, d.test, spread(d.test.size(), o.summary_windows), baseline,
                                               o.n_super);
        m.config()["summary_windows"] = s.windows;
        m.write("shaptime_summary.csv", s.csv());
        report("summary over " + std::to_string(s.windows) + " windows", s.csv());
    }
    m.finish();
    report("shaptime", r.vector_csv());
    return 0;
}

int run_sensitivity(Common& c, const ExplainOptions& o) {
    const WeightsFile wf = open_weights(o.weights);
    const PreparedData d = load_data(c.data);
    std::vector<std::pair<std::size_t, std::size_t>> swaps;
    for (const auto& s : o.swaps) swaps.push_back(parse_swap(s));
    RunManifest m("explain sensitivity", c.out);
    m.config()["weights"] = {{"path", o.weights}, {"fnv1a64", hash_file(o.weights)}};
    m.config()["inputs"] = data_json(c.data);
    m.config()["super_times"] = o.n_super;
    if (swaps.empty()) {
        const Tensor baseline = training_baseline(d.features, d.splits.train);
        const std::size_t count = o.summary_windows ? o.summary_windows : 10;
        const ShapSummary s = shaptime_summary(wf.net, d.test, spread(d.test.size(), count), baseline, o.n_super);
        const auto rank = s.ranking();
        swaps.push_back({rank.front(), rank.back()});
        m.config()["summary_windows"] = s.windows;
        m.write("shaptime_summary.csv", s.csv());
    }
    json pairs = json::array();
    for (const auto& [a, b] : swaps) pairs.push_back({a, b});
    m.config()["swaps"] = pairs;
    const SensitivityResult r = shap_sensitivity(wf.net, d.test, d.stats, swaps, o.n_super);
    CsvTable csv({"swaps", "original_mse", "perturbed_mse", "delta"});
    std::string label;
    for (const auto& [a, b] : swaps) label += (label.empty() ? "" : " ") + ("t" + std::to_string(a) + "<->t" + std::to_string(b));
    csv.add_row({label, format_double(r.original_mse), format_double(r.perturbed_mse), format_double(r.delta)});
    m.write("sensitivity.csv", csv.str());
    m.finish();
    report("sensitivity", csv.str());
    return 0;
}

int run_pfi(Common& c, const ExplainOptions& o) {
    const WeightsFile wf = open_weights(o.weights);
    const PreparedData d = load_data(c.data);
    const std::uint64_t seed = c.config().seed;
    const PfiReport r = pfi_all(wf.net, d.test, d.stats, o.repetitions, seed);
    RunManifest m("explain pfi", c.out);
    m.config()["weights"] = {{"path", o.weights}, {"fnv1a64", hash_file(o.weights)}};
    m.config()["inputs"] = data_json(c.data);
    m.config()["repetitions"] = o.repetitions;
    m.config()["seed"] = seed;
    m.write("pfi.csv", r.csv());
    m.finish();
    report("permutation feature importance", r.csv());
    return 0;
}

int run_ttest(Common& c, const std::string& weights) {
    const WeightsFile wf = open_weights(weights);
    const PreparedData d = load_data(c.data);
    const PredictionTTest r = prediction_ttest(wf.net, d.test);
    RunManifest m("stats ttest", c.out);
    m.config()["weights"] = {{"path", weights}, {"fnv1a64", hash_file(weights)}};
    m.config()["inputs"] = data_json(c.data);
    CsvTable csv({"model", "mean_t", "mean_p", "windows", "excluded"});
    csv.add_row({wf.net.name(), format_double(r.mean_t), format_double(r.mean_p), std::to_string(r.windows),
                 std::to_string(r.excluded)});
    m.write("ttest.csv", csv.str());
    m.finish();
    report("prediction t-test", csv.str());
    return 0;
}

int run_cv_ttest(Common& c, const std::string& a, const std::string& b, std::size_t k, const std::string& metric) {
    const TrainConfig cfg = c.config();
    const CvMetric cm = cv_metric_from_string(metric);
    IngestOptions ingest;
    if (!c.data.holidays.empty()) ingest.holidays = c.data.holidays;
    ingest.gaps = c.data.fill_gaps ? GapPolicy::kForwardFill : GapPolicy::kReject;
    const FeatureMatrix raw = encode_cyclic(ingest_csv(c.data.data, ingest));
    const std::string na = canonical_model_name(a), nb = canonical_model_name(b);
    RunManifest m("stats cv-ttest", c.out);
    m.config()["model_a"] = na;
    m.config()["model_b"] = nb;
    m.config()["k"] = k;
    m.config()["metric"] = to_string(cm);
    m.config()["train"] = train_config_json(cfg);
    m.config()["inputs"] = data_json(c.data);
    const auto factory = [](const std::string& name) {
        return ModelFactory([name](const RandomSource& rng) { return build(name, rng); });
    };
    const CvResult r = cv_ttest(factory(na), factory(nb), raw, k, cm, cfg);
    m.write("cv_folds.csv", r.csv());
    CsvTable csv({"model_a", "model_b", "metric", "k", "t", "p", "df", "mean_diff", "sd"});
    csv.add_row({na, nb, to_string(cm), std::to_string(k), format_double(r.test.t), format_double(r.test.p),
                 format_double(r.test.df), format_double(r.test.mean_diff), format_double(r.test.sd)});
    m.write("cv_ttest.csv", csv.str());
    m.finish();
    report("folds", r.csv());
    report("cross-validated t-test", csv.str());
    return 0;
}

int run_synth(const std::string& out, const std::string& holidays, SyntheticOptions opt) {
    const SyntheticSeries s = generate_synthetic(opt);
    write_series_csv(out, s.table);
    if (!holidays.empty()) write_holidays(holidays, s.holidays);
    std::cout << "wrote " << s.table.size() << " days to " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    retain_freed_memory();
    CLI::App app{"MCDFN demand forecasting toolkit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");
    std::function<int()> action;

    Common c;
    std::string model, tuned, weights, split = "test";
    std::size_t value_bits = 64;
    std::vector<std::string> models;
    HyperbandOptions hb;
    long window = 0;
    ExplainOptions ex;
    std::string model_b, metric = "mse";
    std::size_t folds = 10;
    std::string synth_out, synth_holidays;
    SyntheticOptions synth;

    auto* prep = app.add_subcommand("prepare", "Ingest, encode, split and window a sales series");
    add_data(prep, c);
    add_out(prep, c);
    prep->callback([&] { action = [&] { return run_prepare(c); }; });

    auto* train = app.add_subcommand("train", "Train one model and write its weights and loss curve");
    add_data(train, c);
    add_train(train, c);
    add_out(train, c);
    train->add_option("--model", model, "Model name")->required();
    train->add_option("--tuned", tuned, "best.json from the tune command");
    train->add_option("--value-bits", value_bits, "Weights payload width")->check(CLI::IsMember({32, 64}));
    train->callback([&] { action = [&] { return run_train(c, model, tuned, value_bits); }; });

    auto* eval = app.add_subcommand("evaluate", "Metrics of trained weights on a split");
    add_data(eval, c);
    add_out(eval, c);
    eval->add_option("--weights", weights, "Weights file")->required();
    eval->add_option("--split", split, "train, val, test or all");
    eval->callback([&] { action = [&] { return run_evaluate(c, weights, split); }; });

    auto* bench = app.add_subcommand("benchmark", "Train and compare benchmark models");
    add_data(bench, c);
    add_train(bench, c);
    add_out(bench, c);
    bench->add_option("--models", models, "Models to train (default all)")->delimiter(',');
    bench->callback([&] { action = [&] { return run_benchmark(c, models); }; });

    auto* ablate = app.add_subcommand("ablate", "Train the ablation variants and the full model");
    add_data(ablate, c);
    add_train(ablate, c);
    add_out(ablate, c);
    ablate->callback([&] { action = [&] { return run_ablate(c); }; });

    auto* tune = app.add_subcommand("tune", "Hyperband search over a model family");
    add_data(tune, c);
    add_train(tune, c);
    add_out(tune, c);
    tune->add_option("--model", model, "Model family")->required();
    tune->add_option("--max-epochs", hb.max_epochs, "Largest per-trial epoch budget");
    tune->add_option("--eta", hb.eta, "Halving factor");
    tune->add_option("--iterations", hb.iterations, "Hyperband iterations");
    tune->callback([&] { action = [&] { return run_tune(c, model, hb); }; });

    auto* predict = app.add_subcommand("predict", "30-day forecast against actual sales for one window");
    add_data(predict, c);
    add_out(predict, c);
    predict->add_option("--weights", weights, "Weights file")->required();
    predict->add_option("--split", split, "train, val or test");
    predict->add_option("--window", window, "Window index; negative counts from the end");
    predict->callback([&] { action = [&] { return run_predict(c, weights, split, window); }; });

    auto* explain = app.add_subcommand("explain", "Attribution reports");
    explain->require_subcommand(1);
    auto explain_common = [&](CLI::App* sub) {
        add_data(sub, c);
        add_out(sub, c);
        sub->add_option("--weights", ex.weights, "Weights file")->required();
    };
    auto* shap = explain->add_subcommand("shaptime", "Exact Shapley values over super-times of one test window");
    explain_common(shap);
    shap->add_option("--super", ex.n_super, "Number of super-times");
    shap->add_option("--window", ex.window, "Test window index; negative counts from the end");
    shap->add_option("--summary", ex.summary_windows, "Also average over this many evenly spaced test windows");
    shap->callback([&] { action = [&] { return run_shaptime(c, ex); }; });
    auto* sens = explain->add_subcommand("sensitivity", "Test MSE change after swapping super-times");
    explain_common(sens);
    sens->add_option("--super", ex.n_super, "Number of super-times");
    sens->add_option("--swap", ex.swaps, "Pair such as 1:6 (default: top against bottom mean |phi|)");
    sens->add_option("--summary", ex.summary_windows, "Windows used to rank super-times (default 10)");
    sens->callback([&] { action = [&] { return run_sensitivity(c, ex); }; });
    auto* pfi_cmd = explain->add_subcommand("pfi", "Permutation feature importance on the test split");
    explain_common(pfi_cmd);
    pfi_cmd->add_option("--repetitions", ex.repetitions, "Permutations per feature");
    pfi_cmd->add_option("--seed", c.train.seed, "Permutation seed")
        ->each([&c](const std::string&) { c.seed_given = true; });
    pfi_cmd->callback([&] { action = [&] { return run_pfi(c, ex); }; });

    auto* stats = app.add_subcommand("stats", "Statistical tests");
    stats->require_subcommand(1);
    auto* ttest = stats->add_subcommand("ttest", "Per-window paired t-tests of predictions against truths");
    add_data(ttest, c);
    add_out(ttest, c);
    ttest->add_option("--weights", weights, "Weights file")->required();
    ttest->callback([&] { action = [&] { return run_ttest(c, weights); }; });
    auto* cv = stats->add_subcommand("cv-ttest", "k-fold cross-validated paired t-test of two models");
    add_data(cv, c);
    add_train(cv, c);
    add_out(cv, c);
    cv->add_option("--model-a", model, "First model")->required();
    cv->add_option("--model-b", model_b, "Second model")->required();
    cv->add_option("--k", folds, "Folds");
    cv->add_option("--metric", metric, "mse, mae or mape");
    cv->callback([&] { action = [&] { return run_cv_ttest(c, model, model_b, folds, metric); }; });

    auto* syn = app.add_subcommand("synth", "Write the seeded synthetic sales series");
    syn->add_option("--out", synth_out, "CSV path")->required();
    syn->add_option("--holidays-out", synth_holidays, "Holiday calendar path");
    syn->add_option("--first", synth.first_day, "First day");
    syn->add_option("--last", synth.last_day, "Last day");
    syn->add_option("--seed", synth.seed, "Generator seed");
    syn->callback([&] { action = [&] { return run_synth(synth_out, synth_holidays, synth); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }
    try {
        return action ? action() : kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_numeric() ? kExitNumeric : kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
