#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mcdfn/data.hpp"
#include "mcdfn/network.hpp"
#include "mcdfn/training.hpp"

namespace mcdfn {

struct Metrics {
    double mse = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    /// Percent, over points with y != 0 only.
    double mape = 0.0;
    std::size_t count = 0;
    std::size_t mape_skipped = 0;
};

Metrics metrics(std::span<const double> y, std::span<const double> yhat);

/// RMSE of `yhat` over RMSE of the lag-1 naive forecast, both over t = 2..n.
double theils_u(std::span<const double> y, std::span<const double> yhat);
/// Theil's U pooled over forecast windows: squared errors and squared lag-1
/// differences are summed over steps 2..H of every window before the ratio.
double theils_u_windows(const Tensor& y, const Tensor& yhat);
/// Bounded form RMSE / (RMS(y) + RMS(yhat)), in [0, 1].
double theils_u1(std::span<const double> y, std::span<const double> yhat);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
    double mean_diff = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};

double student_t_cdf(double t, double df);
/// Two-sided tail probability P(|T| >= |t|).
double student_t_two_sided_p(double t, double df);

/// Paired test on d = a - b with n - 1 degrees of freedom. Throws a
/// degenerate error when d has zero spread.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

struct PredictionTTest {
    double mean_t = 0.0;
    double mean_p = 0.0;
    std::size_t windows = 0;
    std::size_t excluded = 0;
};

/// Per-window paired tests of predictions against truths (d = yhat - y),
/// averaged over windows with non-zero spread.
PredictionTTest prediction_ttest(const Tensor& truth, const Tensor& pred);
PredictionTTest prediction_ttest(const Network& net, const WindowSet& test);

/// Inference-mode predictions and targets in natural sales units.
struct Forecast {
    Tensor truth;
    Tensor pred;
};

Forecast forecast(const Network& net, const WindowSet& windows, const NormalizationStats& stats);

/// One row of a performance table.
struct MetricsRow {
    std::string model;
    std::string split;
    /// Training objective: MSE on standardized targets.
    double loss = 0.0;
    Metrics metrics;
    double theils_u = 0.0;
};

MetricsRow evaluate_split(const Network& net, const WindowSet& windows, const NormalizationStats& stats,
                          const std::string& model);
/// model,split,loss,mse,rmse,mae,mape,theils_u
std::string metrics_csv(const std::vector<MetricsRow>& rows);

enum class CvMetric { kMSE, kMAE, kMAPE };
CvMetric cv_metric_from_string(const std::string& name);
const char* to_string(CvMetric metric);

using ModelFactory = std::function<Network(const RandomSource&)>;

struct CvFold {
    std::size_t fold = 0;
    RowRange held_out;
    double a = 0.0;
    double b = 0.0;
};

struct CvResult {
    TTestResult test;
    std::vector<CvFold> folds;

    std::string csv() const;
};

/// k contiguous folds over the rows of `raw` (unstandardized features). Each
/// fold holds out one block; both models train on the windows that fit in
/// the remaining blocks, standardized with those rows' statistics, and are
/// scored on the held-out windows.
CvResult cv_ttest(const ModelFactory& model_a, const ModelFactory& model_b, const FeatureMatrix& raw,
                  std::size_t k, CvMetric metric, const TrainConfig& cfg, std::size_t input_len = 30,
                  std::size_t horizon = 30);

struct EfficiencyRow {
    std::string model;
    double theils_u = 0.0;
    std::size_t params = 0;
    double train_ms = 0.0;
    double inference_ms = 0.0;
};

struct BenchmarkReport {
    std::vector<MetricsRow> rows;
    std::vector<EfficiencyRow> efficiency;
    std::vector<TrainReport> training;

    std::string efficiency_csv() const;
};

/// Trains every named model with the same seed and reports validation and
/// test rows plus efficiency figures.
BenchmarkReport benchmark(const std::vector<std::string>& models, const PreparedData& data, const TrainConfig& cfg,
                          const std::function<void(const std::string&)>& progress = {});

struct AblationRow {
    std::string variant;
    bool reference = false;
    double loss = 0.0;
    Metrics metrics;
};

struct AblationReport {
    std::vector<AblationRow> rows;

    /// variant,loss,mse,rmse,mae,mape,reference
    std::string csv() const;
    /// Index of the row with the lowest test MSE.
    std::size_t best_mse_row() const;
};

AblationRow score_variant(const std::string& variant, const Network& net, const PreparedData& data,
                          bool reference);

/// Trains the ten ablation variants then the full model under one
/// configuration and scores them on the test split.
AblationReport ablation_run(const PreparedData& data, const TrainConfig& cfg,
                            const std::function<void(const std::string&)>& progress = {});

}  // namespace mcdfn
