#include "mcdfn/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "mcdfn/errors.hpp"
#include "mcdfn/evaluation.hpp"
#include "mcdfn/io.hpp"

namespace mcdfn {

namespace {

constexpr std::size_t kCoalitionChunk = 256;

void copy_rows(double* dst, const double* src, RowRange rows, std::size_t features) {
    std::copy(src + rows.begin * features, src + rows.end * features, dst + rows.begin * features);
}

}  // namespace

std::vector<RowRange> super_times(std::size_t steps, std::size_t n) {
    if (n == 0 || n > steps) {
        fail(ErrorKind::kConfig, "cannot split " + std::to_string(steps) + " steps into " + std::to_string(n) +
                                     " super-times");
    }
    std::vector<RowRange> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({i * steps / n, (i + 1) * steps / n});
    return out;
}

Tensor training_baseline(const FeatureMatrix& standardized, RowRange train) {
    const std::size_t f = standardized.values.dim(1);
    if (train.size() == 0 || train.end > standardized.rows()) fail(ErrorKind::kData, "baseline needs training rows");
    Tensor base({f});
    for (std::size_t c = 1; c < f; ++c) {
        double s = 0.0;
        for (std::size_t r = train.begin; r < train.end; ++r) s += standardized.values.at(r, c);
        base[c] = s / static_cast<double>(train.size());
    }
    return base;
}

std::vector<std::vector<double>> shapley_exact(std::size_t players, std::size_t outputs,
                                               const std::function<std::vector<double>(std::uint32_t)>& value) {
    if (players == 0) fail(ErrorKind::kConfig, "Shapley values need at least one player");
    if (players > kMaxExactPlayers) {
        fail(ErrorKind::kBudget, std::to_string(players) + " super-times exceed the exact enumeration limit of " +
                                     std::to_string(kMaxExactPlayers) + "; sampling mode is not available");
    }
    const std::uint32_t masks = 1u << players;
    std::vector<std::vector<double>> v(masks);
    for (std::uint32_t m = 0; m < masks; ++m) {
        v[m] = value(m);
        if (v[m].size() != outputs) fail(ErrorKind::kDimension, "coalition value has the wrong number of outputs");
    }
    std::vector<double> weight(players);
    for (std::size_t s = 0; s < players; ++s) {
        double w = 1.0 / static_cast<double>(players);
        for (std::size_t k = 1; k <= s; ++k) w *= static_cast<double>(k) / static_cast<double>(players - k);
        weight[s] = w;
    }
    std::vector<std::vector<double>> phi(players, std::vector<double>(outputs, 0.0));
    for (std::size_t i = 0; i < players; ++i) {
        const std::uint32_t bit = 1u << i;
        for (std::uint32_t m = 0; m < masks; ++m) {
            if (m & bit) continue;
            const double w = weight[static_cast<std::size_t>(std::popcount(m))];
            for (std::size_t o = 0; o < outputs; ++o) phi[i][o] += w * (v[m | bit][o] - v[m][o]);
        }
    }
    return phi;
}

ShapReport shaptime(const Network& net, const Tensor& window, const Tensor& baseline, std::size_t n_super) {
    const Shape& in = net.spec().input;
    if (window.rank() != 2 || window.dim(0) != in[0] || window.dim(1) != in[1]) {
        fail(ErrorKind::kDimension, "window " + shape_to_string(window.shape()) + " does not match the network input " +
                                        shape_to_string(in));
    }
    if (baseline.size() != in[1]) fail(ErrorKind::kDimension, "baseline row must have one value per feature");
    if (n_super > kMaxExactPlayers) {
        fail(ErrorKind::kBudget, std::to_string(n_super) + " super-times exceed the exact enumeration limit of " +
                                     std::to_string(kMaxExactPlayers) + "; sampling mode is not available");
    }
    const std::size_t steps = in[0], features = in[1], horizon = net.spec().horizon;
    ShapReport report;
    report.segments = super_times(steps, n_super);

    Tensor base_window({steps, features});
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t c = 0; c < features; ++c) base_window.at(t, c) = baseline[c];

    const std::uint32_t masks = 1u << n_super;
    std::vector<std::vector<double>> values(masks);
    const std::size_t per = steps * features;
    for (std::uint32_t first = 0; first < masks; first += kCoalitionChunk) {
        const std::uint32_t count = std::min<std::uint32_t>(kCoalitionChunk, masks - first);
        Tensor batch({count, steps, features});
        for (std::uint32_t k = 0; k < count; ++k) {
            const std::uint32_t m = first + k;
            double* dst = batch.data() + k * per;
            std::copy(base_window.data(), base_window.data() + per, dst);
            for (std::size_t i = 0; i < n_super; ++i)
                if (m & (1u << i)) copy_rows(dst, window.data(), report.segments[i], features);
        }
        const Tensor pred = net.predict_batch(batch);
        for (std::uint32_t k = 0; k < count; ++k) {
            std::vector<double> v(pred.data() + k * horizon, pred.data() + (k + 1) * horizon);
            double mean = 0.0;
            for (double x : v) mean += x;
            v.push_back(mean / static_cast<double>(horizon));
            values[first + k] = std::move(v);
        }
    }

    const auto phi = shapley_exact(n_super, horizon + 1, [&](std::uint32_t m) { return values[m]; });
    report.heatmap = Tensor({horizon, n_super});
    for (std::size_t i = 0; i < n_super; ++i) {
        report.phi.push_back(phi[i][horizon]);
        for (std::size_t h = 0; h < horizon; ++h) report.heatmap.at(h, i) = phi[i][h];
    }
    const auto& empty = values.front();
    const auto& full = values.back();
    report.baseline_prediction = empty[horizon];
    report.explained_prediction = full[horizon];
    report.residual = report.explained_prediction - report.baseline_prediction -
                      std::accumulate(report.phi.begin(), report.phi.end(), 0.0);
    report.step_baseline.assign(empty.begin(), empty.end() - 1);
    report.step_explained.assign(full.begin(), full.end() - 1);
    for (std::size_t h = 0; h < horizon; ++h) {
        double r = full[h] - empty[h];
        for (std::size_t i = 0; i < n_super; ++i) r -= phi[i][h];
        report.max_step_residual = std::max(report.max_step_residual, std::abs(r));
    }
    return report;
}

std::string ShapReport::vector_csv() const {
    CsvTable csv({"super_time", "begin", "end", "phi"});
    for (std::size_t i = 0; i < phi.size(); ++i) {
        csv.add_row({"t" + std::to_string(i), std::to_string(segments[i].begin), std::to_string(segments[i].end),
                     format_double(phi[i])});
    }
    csv.add_row({"baseline", "", "", format_double(baseline_prediction)});
    csv.add_row({"prediction", "", "", format_double(explained_prediction)});
    csv.add_row({"residual", "", "", format_double(residual)});
    return csv.str();
}

std::string ShapReport::heatmap_csv() const {
    std::vector<std::string> header{"step"};
    for (std::size_t i = 0; i < phi.size(); ++i) header.push_back("t" + std::to_string(i));
    CsvTable csv(header);
    for (std::size_t h = 0; h < heatmap.dim(0); ++h) {
        std::vector<std::string> row{std::to_string(h + 1)};
        for (std::size_t i = 0; i < heatmap.dim(1); ++i) row.push_back(format_double(heatmap.at(h, i)));
        csv.add_row(row);
    }
    return csv.str();
}

ShapSummary shaptime_summary(const Network& net, const WindowSet& windows, const std::vector<std::size_t>& indices,
                             const Tensor& baseline, std::size_t n_super) {
    if (indices.empty()) fail(ErrorKind::kData, "no windows to explain");
    ShapSummary s;
    s.mean_phi.assign(n_super, 0.0);
    s.mean_abs_phi.assign(n_super, 0.0);
    const std::size_t steps = windows.inputs.dim(1), features = windows.inputs.dim(2);
    for (std::size_t idx : indices) {
        if (idx >= windows.size()) fail(ErrorKind::kData, "window index " + std::to_string(idx) + " out of range");
        Tensor w({steps, features});
        std::copy_n(windows.inputs.data() + idx * steps * features, steps * features, w.data());
        const ShapReport r = shaptime(net, w, baseline, n_super);
        s.segments = r.segments;
        for (std::size_t i = 0; i < n_super; ++i) {
            s.mean_phi[i] += r.phi[i];
            s.mean_abs_phi[i] += std::abs(r.phi[i]);
        }
        s.max_residual = std::max(s.max_residual, std::abs(r.residual));
        ++s.windows;
    }
    for (std::size_t i = 0; i < n_super; ++i) {
        s.mean_phi[i] /= static_cast<double>(s.windows);
        s.mean_abs_phi[i] /= static_cast<double>(s.windows);
    }
    return s;
}

std::vector<std::size_t> ShapSummary::ranking() const {
    std::vector<std::size_t> order(mean_abs_phi.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return mean_abs_phi[a] > mean_abs_phi[b]; });
    return order;
}

std::string ShapSummary::csv() const {
    CsvTable csv({"super_time", "begin", "end", "mean_phi", "mean_abs_phi"});
    for (std::size_t i = 0; i < mean_phi.size(); ++i) {
        csv.add_row({"t" + std::to_string(i), std::to_string(segments[i].begin), std::to_string(segments[i].end),
                     format_double(mean_phi[i]), format_double(mean_abs_phi[i])});
    }
    return csv.str();
}

SensitivityResult shap_sensitivity(const Network& net, const WindowSet& windows, const NormalizationStats& stats,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& swaps,
                                   std::size_t n_super) {
    if (windows.size() == 0) fail(ErrorKind::kData, "sensitivity needs at least one window");
    const std::size_t steps = windows.inputs.dim(1), features = windows.inputs.dim(2);
    const auto segments = super_times(steps, n_super);
    for (const auto& [a, b] : swaps) {
        if (a >= n_super || b >= n_super) fail(ErrorKind::kConfig, "super-time index out of range");
        if (a == b) fail(ErrorKind::kConfig, "swap pair names the same super-time twice");
        if (segments[a].size() != segments[b].size()) {
            fail(ErrorKind::kConfig, "super-times t" + std::to_string(a) + " and t" + std::to_string(b) +
                                         " differ in length");
        }
    }
    WindowSet perturbed = windows;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        double* x = perturbed.inputs.data() + w * steps * features;
        for (const auto& [a, b] : swaps) {
            std::swap_ranges(x + segments[a].begin * features, x + segments[a].end * features,
                             x + segments[b].begin * features);
        }
    }
    const double scale = stats.stddev * stats.stddev;
    SensitivityResult r;
    r.original_mse = scale * evaluate_mse(net, windows);
    r.perturbed_mse = scale * evaluate_mse(net, perturbed);
    r.delta = r.perturbed_mse - r.original_mse;
    return r;
}

namespace {

PfiEntry pfi_with_base(const Network& net, const WindowSet& test, double scale, double base, std::size_t feature,
                       std::size_t repetitions, std::uint64_t seed) {
    if (feature >= kFeatureCount || feature >= test.inputs.dim(2)) {
        fail(ErrorKind::kConfig, "feature index " + std::to_string(feature) + " out of range");
    }
    if (repetitions == 0) fail(ErrorKind::kConfig, "PFI needs at least one repetition");
    if (test.size() < 2) fail(ErrorKind::kData, "PFI needs at least two windows to permute");
    if (!(base > 0.0)) fail(ErrorKind::kDegenerate, "PFI: original error is zero");
    const std::size_t n = test.size(), steps = test.inputs.dim(1), features = test.inputs.dim(2);
    PfiEntry e;
    e.feature = feature;
    e.name = std::string(kFeatureNames[feature]);
    double sum = 0.0;
    for (std::size_t r = 0; r < repetitions; ++r) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        RandomSource(seed).child("pfi/" + e.name + "/" + std::to_string(r)).shuffle(perm);
        WindowSet shuffled = test;
        for (std::size_t w = 0; w < n; ++w) {
            const double* src = test.inputs.data() + perm[w] * steps * features;
            double* dst = shuffled.inputs.data() + w * steps * features;
            for (std::size_t t = 0; t < steps; ++t) dst[t * features + feature] = src[t * features + feature];
        }
        sum += scale * evaluate_mse(net, shuffled);
    }
    e.permuted_mse = sum / static_cast<double>(repetitions);
    e.paper_score = (base - e.permuted_mse) / base;
    e.error_increase = (e.permuted_mse - base) / base;
    return e;
}

}  // namespace

PfiEntry pfi(const Network& net, const WindowSet& test, const NormalizationStats& stats, std::size_t feature,
             std::size_t repetitions, std::uint64_t seed) {
    const double scale = stats.stddev * stats.stddev;
    return pfi_with_base(net, test, scale, scale * evaluate_mse(net, test), feature, repetitions, seed);
}

PfiReport pfi_all(const Network& net, const WindowSet& test, const NormalizationStats& stats,
                  std::size_t repetitions, std::uint64_t seed) {
    const double scale = stats.stddev * stats.stddev;
    PfiReport report;
    report.base_mse = scale * evaluate_mse(net, test);
    report.repetitions = repetitions;
    report.seed = seed;
    for (std::size_t f = 0; f < test.inputs.dim(2); ++f)
        report.entries.push_back(pfi_with_base(net, test, scale, report.base_mse, f, repetitions, seed));
    return report;
}

std::string PfiReport::csv() const {
    std::vector<const PfiEntry*> order;
    for (const auto& e : entries) order.push_back(&e);
    std::stable_sort(order.begin(), order.end(),
                     [](const PfiEntry* a, const PfiEntry* b) { return a->error_increase > b->error_increase; });
    CsvTable csv({"feature", "index", "base_mse", "permuted_mse", "error_increase", "paper_score", "repetitions",
                  "seed"});
    for (const PfiEntry* e : order) {
        csv.add_row({e->name, std::to_string(e->feature), format_double(base_mse), format_double(e->permuted_mse),
                     format_double(e->error_increase), format_double(e->paper_score), std::to_string(repetitions),
                     std::to_string(seed)});
    }
    return csv.str();
}

}  // namespace mcdfn
