#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mcdfn/data.hpp"
#include "mcdfn/network.hpp"

namespace mcdfn {

inline constexpr std::size_t kMaxExactPlayers = 16;

/// Near-even contiguous partition of `steps` rows into n segments.
std::vector<RowRange> super_times(std::size_t steps, std::size_t n);

/// Column means of the training rows, with the standardized sales column at 0.
Tensor training_baseline(const FeatureMatrix& standardized, RowRange train);

/// Exact Shapley values for every output of a vector-valued game. `value`
/// receives a coalition bitmask and returns one value per output; the result
/// is [players][outputs].
std::vector<std::vector<double>> shapley_exact(std::size_t players, std::size_t outputs,
                                               const std::function<std::vector<double>(std::uint32_t)>& value);

struct ShapReport {
    std::vector<RowRange> segments;
    std::vector<double> phi;
    /// [horizon, n_super]
    Tensor heatmap;
    double baseline_prediction = 0.0;
    double explained_prediction = 0.0;
    double residual = 0.0;
    std::vector<double> step_baseline;
    std::vector<double> step_explained;
    /// Largest per-step efficiency residual of the heatmap rows.
    double max_step_residual = 0.0;

    /// super_time,begin,end,phi followed by the baseline, prediction and residual rows.
    std::string vector_csv() const;
    /// step,t0,...,t{n-1}
    std::string heatmap_csv() const;
};

/// Coalition values are inference-mode predictions with every super-time
/// outside the coalition replaced by `baseline` rows ([features]).
ShapReport shaptime(const Network& net, const Tensor& window, const Tensor& baseline, std::size_t n_super = 10);

struct ShapSummary {
    std::vector<RowRange> segments;
    std::vector<double> mean_phi;
    std::vector<double> mean_abs_phi;
    std::size_t windows = 0;
    double max_residual = 0.0;

    /// Super-times ordered by mean |phi|, largest first.
    std::vector<std::size_t> ranking() const;
    std::string csv() const;
};

ShapSummary shaptime_summary(const Network& net, const WindowSet& windows, const std::vector<std::size_t>& indices,
                             const Tensor& baseline, std::size_t n_super = 10);

struct SensitivityResult {
    double original_mse = 0.0;
    double perturbed_mse = 0.0;
    double delta = 0.0;
};

/// Swaps the rows of each named pair of super-times in every window and
/// reports the change in test MSE (sales units).
SensitivityResult shap_sensitivity(const Network& net, const WindowSet& windows, const NormalizationStats& stats,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& swaps,
                                   std::size_t n_super = 10);

struct PfiEntry {
    std::size_t feature = 0;
    std::string name;
    double permuted_mse = 0.0;
    /// (orig - perm) / orig: negative for influential features.
    double paper_score = 0.0;
    /// (perm - orig) / orig: positive for influential features.
    double error_increase = 0.0;
};

struct PfiReport {
    double base_mse = 0.0;
    std::size_t repetitions = 0;
    std::uint64_t seed = 0;
    std::vector<PfiEntry> entries;

    /// Sorted by error increase, largest first.
    std::string csv() const;
};

/// Shuffles one feature's whole 30-step columns between windows.
PfiEntry pfi(const Network& net, const WindowSet& test, const NormalizationStats& stats, std::size_t feature,
             std::size_t repetitions, std::uint64_t seed);
PfiReport pfi_all(const Network& net, const WindowSet& test, const NormalizationStats& stats,
                  std::size_t repetitions, std::uint64_t seed);

}  // namespace mcdfn
