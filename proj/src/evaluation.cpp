#include "mcdfn/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include <boost/math/distributions/students_t.hpp>

#include "mcdfn/errors.hpp"
#include "mcdfn/io.hpp"

namespace mcdfn {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) {
        fail(ErrorKind::kMetric, std::string(what) + ": lengths differ (" + std::to_string(a.size()) + " vs " +
                                     std::to_string(b.size()) + ")");
    }
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

Metrics metrics(std::span<const double> y, std::span<const double> yhat) {
    require_same_length(y, yhat, "metrics");
    if (y.empty()) fail(ErrorKind::kMetric, "metrics need at least one point");
    Metrics m;
    m.count = y.size();
    double se = 0.0, ae = 0.0, ape = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - yhat[i];
        se += e * e;
        ae += std::abs(e);
        if (y[i] != 0.0) {
            ape += std::abs(e / y[i]);
            ++used;
        }
    }
    const double n = static_cast<double>(y.size());
    m.mse = se / n;
    m.rmse = std::sqrt(m.mse);
    m.mae = ae / n;
    m.mape_skipped = y.size() - used;
    m.mape = used ? 100.0 * ape / static_cast<double>(used) : 0.0;
    return m;
}

double theils_u(std::span<const double> y, std::span<const double> yhat) {
    require_same_length(y, yhat, "Theil's U");
    if (y.size() < 2) fail(ErrorKind::kMetric, "Theil's U needs at least two points");
    double num = 0.0, den = 0.0;
    for (std::size_t t = 1; t < y.size(); ++t) {
        num += (y[t] - yhat[t]) * (y[t] - yhat[t]);
        den += (y[t] - y[t - 1]) * (y[t] - y[t - 1]);
    }
    if (den == 0.0) fail(ErrorKind::kDegenerate, "Theil's U: the series has no change between steps");
    return std::sqrt(num / den);
}

double theils_u_windows(const Tensor& y, const Tensor& yhat) {
    if (y.shape() != yhat.shape() || y.rank() < 2) fail(ErrorKind::kMetric, "Theil's U: window shapes differ");
    const std::size_t n = y.dim(0);
    const std::size_t h = y.size() / n;
    if (h < 2) fail(ErrorKind::kMetric, "Theil's U needs windows of at least two steps");
    double num = 0.0, den = 0.0;
    for (std::size_t w = 0; w < n; ++w) {
        const double* a = y.data() + w * h;
        const double* b = yhat.data() + w * h;
        for (std::size_t t = 1; t < h; ++t) {
            num += (a[t] - b[t]) * (a[t] - b[t]);
            den += (a[t] - a[t - 1]) * (a[t] - a[t - 1]);
        }
    }
    if (den == 0.0) fail(ErrorKind::kDegenerate, "Theil's U: the series has no change between steps");
    return std::sqrt(num / den);
}

double theils_u1(std::span<const double> y, std::span<const double> yhat) {
    require_same_length(y, yhat, "Theil's U1");
    if (y.empty()) fail(ErrorKind::kMetric, "Theil's U1 needs at least one point");
    double se = 0.0, yy = 0.0, pp = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        se += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        yy += y[i] * y[i];
        pp += yhat[i] * yhat[i];
    }
    const double n = static_cast<double>(y.size());
    const double den = std::sqrt(yy / n) + std::sqrt(pp / n);
    if (den == 0.0) fail(ErrorKind::kDegenerate, "Theil's U1: both series are zero");
    return std::sqrt(se / n) / den;
}

double student_t_cdf(double t, double df) {
    if (!(df > 0.0) || std::isnan(t)) fail(ErrorKind::kMetric, "Student t needs df > 0 and a numeric t");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    return boost::math::cdf(boost::math::students_t_distribution<double>(df), t);
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0) || std::isnan(t)) fail(ErrorKind::kMetric, "Student t needs df > 0 and a numeric t");
    if (std::isinf(t)) return 0.0;
    const double tail = boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df),
                                                                 std::abs(t)));
    return std::clamp(2.0 * tail, 0.0, 1.0);
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
    require_same_length(a, b, "paired t-test");
    if (a.size() < 2) fail(ErrorKind::kMetric, "paired t-test needs at least two pairs");
    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = (a[i] - b[i]) - mean;
        ss += e * e;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) fail(ErrorKind::kDegenerate, "paired t-test: differences have zero variance");
    TTestResult r;
    r.n = n;
    r.df = static_cast<double>(n - 1);
    r.mean_diff = mean;
    r.sd = sd;
    r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

PredictionTTest prediction_ttest(const Tensor& truth, const Tensor& pred) {
    if (truth.shape() != pred.shape() || truth.rank() < 2) fail(ErrorKind::kMetric, "prediction shapes differ");
    PredictionTTest out;
    const std::size_t n = truth.dim(0);
    const std::size_t h = truth.size() / n;
    double sum_t = 0.0, sum_p = 0.0;
    for (std::size_t w = 0; w < n; ++w) {
        const std::span<const double> y(truth.data() + w * h, h);
        const std::span<const double> yhat(pred.data() + w * h, h);
        try {
            const TTestResult r = paired_ttest(yhat, y);
            sum_t += r.t;
            sum_p += r.p;
            ++out.windows;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::kDegenerate) throw;
            ++out.excluded;
        }
    }
    if (out.windows == 0) {
        fail(ErrorKind::kDegenerate, "prediction t-test: all " + std::to_string(n) + " windows have zero variance");
    }
    out.mean_t = sum_t / static_cast<double>(out.windows);
    out.mean_p = sum_p / static_cast<double>(out.windows);
    return out;
}

Forecast forecast(const Network& net, const WindowSet& windows, const NormalizationStats& stats) {
    Forecast f;
    f.pred = net.predict_batch(windows.inputs);
    f.truth = windows.targets;
    for (double& v : f.pred.values()) v = inverse_standardize(v, stats);
    for (double& v : f.truth.values()) v = inverse_standardize(v, stats);
    return f;
}

PredictionTTest prediction_ttest(const Network& net, const WindowSet& test) {
    if (test.size() == 0) fail(ErrorKind::kData, "prediction t-test needs at least one window");
    return prediction_ttest(test.targets, net.predict_batch(test.inputs));
}

MetricsRow evaluate_split(const Network& net, const WindowSet& windows, const NormalizationStats& stats,
                          const std::string& model) {
    const Forecast f = forecast(net, windows, stats);
    MetricsRow row;
    row.model = model;
    row.split = to_string(windows.tag);
    row.loss = evaluate_mse(net, windows);
    row.metrics = metrics(f.truth.values(), f.pred.values());
    row.theils_u = theils_u_windows(f.truth, f.pred);
    return row;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    CsvTable csv({"model", "split", "loss", "mse", "rmse", "mae", "mape", "theils_u"});
    for (const auto& r : rows) {
        csv.add_row({r.model, r.split, format_double(r.loss), format_double(r.metrics.mse),
                     format_double(r.metrics.rmse), format_double(r.metrics.mae), format_double(r.metrics.mape),
                     format_double(r.theils_u)});
    }
    return csv.str();
}

CvMetric cv_metric_from_string(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "mse") return CvMetric::kMSE;
    if (s == "mae") return CvMetric::kMAE;
    if (s == "mape") return CvMetric::kMAPE;
    fail(ErrorKind::kConfig, "unknown metric '" + name + "' (expected mse, mae or mape)");
}

const char* to_string(CvMetric metric) {
    switch (metric) {
        case CvMetric::kMSE: return "mse";
        case CvMetric::kMAE: return "mae";
        case CvMetric::kMAPE: return "mape";
    }
    return "?";
}

std::string CvResult::csv() const {
    CsvTable csv({"fold", "begin", "end", "model_a", "model_b"});
    for (const auto& f : folds) {
        csv.add_row({std::to_string(f.fold), std::to_string(f.held_out.begin), std::to_string(f.held_out.end),
                     format_double(f.a), format_double(f.b)});
    }
    return csv.str();
}

namespace {

WindowSet concat_windows(const std::vector<WindowSet>& parts, SplitTag tag) {
    std::size_t n = 0;
    for (const auto& p : parts) n += p.size();
    const WindowSet& first = parts.front();
    WindowSet out;
    out.tag = tag;
    out.input_len = first.input_len;
    out.horizon = first.horizon;
    Shape in = first.inputs.shape(), tg = first.targets.shape();
    in[0] = tg[0] = n;
    out.inputs = Tensor(in);
    out.targets = Tensor(tg);
    std::size_t xi = 0, yi = 0;
    for (const auto& p : parts) {
        std::memcpy(out.inputs.data() + xi, p.inputs.data(), p.inputs.size() * sizeof(double));
        std::memcpy(out.targets.data() + yi, p.targets.data(), p.targets.size() * sizeof(double));
        xi += p.inputs.size();
        yi += p.targets.size();
        out.starts.insert(out.starts.end(), p.starts.begin(), p.starts.end());
    }
    return out;
}

double score(const Metrics& m, CvMetric metric) {
    switch (metric) {
        case CvMetric::kMSE: return m.mse;
        case CvMetric::kMAE: return m.mae;
        case CvMetric::kMAPE: return m.mape;
    }
    return m.mse;
}

}  // namespace

CvResult cv_ttest(const ModelFactory& model_a, const ModelFactory& model_b, const FeatureMatrix& raw,
                  std::size_t k, CvMetric metric, const TrainConfig& cfg, std::size_t input_len,
                  std::size_t horizon) {
    if (k < 2) fail(ErrorKind::kConfig, "cross-validation needs k >= 2");
    const std::size_t n = raw.rows();
    const std::size_t span = input_len + horizon;
    CvResult result;
    std::vector<double> a_scores, b_scores;
    for (std::size_t f = 0; f < k; ++f) {
        const RowRange held{f * n / k, (f + 1) * n / k};
        if (held.size() < span) {
            fail(ErrorKind::kSplit, "fold " + std::to_string(f) + " has " + std::to_string(held.size()) +
                                        " rows, windows need " + std::to_string(span));
        }
        const RowRange before{0, held.begin}, after{held.end, n};

        double sum = 0.0, ss = 0.0;
        std::size_t count = 0;
        for (const RowRange r : {before, after}) {
            for (std::size_t i = r.begin; i < r.end; ++i) {
                sum += raw.raw_sales[i];
                ++count;
            }
        }
        const double mean = sum / static_cast<double>(count);
        for (const RowRange r : {before, after}) {
            for (std::size_t i = r.begin; i < r.end; ++i) ss += (raw.raw_sales[i] - mean) * (raw.raw_sales[i] - mean);
        }
        const NormalizationStats stats{mean, std::sqrt(ss / static_cast<double>(count))};
        const FeatureMatrix fm = standardize(raw, stats);

        std::vector<WindowSet> parts;
        for (const RowRange r : {before, after}) {
            if (r.size() >= span) parts.push_back(make_windows(fm, r, SplitTag::kTrain, input_len, horizon));
        }
        if (parts.empty()) fail(ErrorKind::kSplit, "fold " + std::to_string(f) + " leaves no training windows");
        const WindowSet train = concat_windows(parts, SplitTag::kTrain);
        const WindowSet test = make_windows(fm, held, SplitTag::kTest, input_len, horizon);

        const RandomSource init = RandomSource(cfg.seed).child("cv/" + std::to_string(f));
        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(cfg.seed, "cv/" + std::to_string(f));
        double scores[2];
        const ModelFactory* factories[2] = {&model_a, &model_b};
        for (int m = 0; m < 2; ++m) {
            Network net = (*factories[m])(init);
            fit(net, train, train, fold_cfg);
            const Forecast fc = forecast(net, test, stats);
            scores[m] = score(metrics(fc.truth.values(), fc.pred.values()), metric);
        }
        result.folds.push_back({f, held, scores[0], scores[1]});
        a_scores.push_back(scores[0]);
        b_scores.push_back(scores[1]);
    }
    result.test = paired_ttest(a_scores, b_scores);
    return result;
}

std::string BenchmarkReport::efficiency_csv() const {
    CsvTable csv({"model", "theils_u", "params", "train_ms", "inference_ms"});
    for (const auto& e : efficiency) {
        csv.add_row({e.model, format_double(e.theils_u), std::to_string(e.params), format_fixed(e.train_ms, 1),
                     format_fixed(e.inference_ms, 1)});
    }
    return csv.str();
}

BenchmarkReport benchmark(const std::vector<std::string>& models, const PreparedData& data, const TrainConfig& cfg,
                          const std::function<void(const std::string&)>& progress) {
    if (models.empty()) fail(ErrorKind::kConfig, "benchmark needs at least one model");
    BenchmarkReport report;
    std::vector<MetricsRow> test_rows;
    for (const auto& name : models) {
        if (progress) progress(name);
        TrainReport tr;
        const Network net = build_and_fit(name, data.train, data.val, cfg, &tr);
        report.rows.push_back(evaluate_split(net, data.val, data.stats, net.name()));
        const auto t0 = std::chrono::steady_clock::now();
        const Tensor pred = net.predict_batch(data.test.inputs);
        const double infer = elapsed_ms(t0);
        (void)pred;
        MetricsRow test = evaluate_split(net, data.test, data.stats, net.name());
        report.efficiency.push_back({net.name(), test.theils_u, net.param_count(), tr.wall_ms, infer});
        test_rows.push_back(std::move(test));
        report.training.push_back(std::move(tr));
    }
    report.rows.insert(report.rows.end(), test_rows.begin(), test_rows.end());
    return report;
}

std::string AblationReport::csv() const {
    CsvTable csv({"variant", "loss", "mse", "rmse", "mae", "mape", "reference"});
    for (const auto& r : rows) {
        csv.add_row({r.variant, format_double(r.loss), format_double(r.metrics.mse), format_double(r.metrics.rmse),
                     format_double(r.metrics.mae), format_double(r.metrics.mape), r.reference ? "1" : "0"});
    }
    return csv.str();
}

std::size_t AblationReport::best_mse_row() const {
    if (rows.empty()) fail(ErrorKind::kMetric, "empty ablation report");
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].metrics.mse < rows[best].metrics.mse) best = i;
    return best;
}

AblationRow score_variant(const std::string& variant, const Network& net, const PreparedData& data,
                          bool reference) {
    const MetricsRow m = evaluate_split(net, data.test, data.stats, variant);
    return {variant, reference, m.loss, m.metrics};
}

AblationReport ablation_run(const PreparedData& data, const TrainConfig& cfg,
                            const std::function<void(const std::string&)>& progress) {
    AblationReport report;
    for (const auto& excluded : ablation_variants()) {
        const std::string name = ablation_name(excluded);
        if (progress) progress(name);
        const Network net = build_and_fit(name, data.train, data.val, cfg);
        report.rows.push_back(score_variant(name, net, data, false));
    }
    if (progress) progress("MCDFN");
    const Network full = build_and_fit("MCDFN", data.train, data.val, cfg);
    report.rows.push_back(score_variant("MCDFN", full, data, true));
    return report;
}

}  // namespace mcdfn
