#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcdfn/tensor.hpp"

namespace mcdfn {

using Date = std::chrono::sys_days;

/// Parses strict YYYY-MM-DD; returns nullopt for anything else or an invalid day.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date date);
/// Seconds since 1970-01-01T00:00:00Z at midnight of `date`.
std::int64_t unix_seconds(Date date);

/// Daily sales with a holiday flag; dates strictly increasing by one day.
struct SeriesTable {
    std::vector<Date> dates;
    std::vector<double> sales;
    std::vector<std::uint8_t> holiday;

    std::size_t size() const noexcept { return dates.size(); }
};

enum class GapPolicy { kReject, kForwardFill };

struct IngestOptions {
    std::string date_column = "date";
    std::string sales_column = "sales";
    std::optional<std::filesystem::path> holidays;
    GapPolicy gaps = GapPolicy::kReject;
};

/// Newline-delimited YYYY-MM-DD dates; blank lines and '#' comments skipped.
std::vector<Date> read_holidays(const std::filesystem::path& path);
SeriesTable ingest_csv(const std::filesystem::path& path, const IngestOptions& options = {});

inline constexpr std::size_t kFeatureCount = 10;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "sales_z", "is_holiday", "day_sin", "day_cos", "week_sin", "week_cos",
    "month_sin", "month_cos", "year_sin", "year_cos"};
inline constexpr double kWeekSeconds = 604800.0;
inline constexpr double kYearSeconds = 31556952.0;
inline constexpr double kDayCycle = 30.0;
inline constexpr double kMonthCycle = 12.0;

/// Feature index by name; throws a config error when unknown.
std::size_t feature_index(std::string_view name);

struct NormalizationStats {
    double mean = 0.0;
    double stddev = 1.0;
};

/// [N, 10] feature rows. Column 0 holds raw sales until standardize() runs.
struct FeatureMatrix {
    Tensor values;
    std::vector<Date> dates;
    std::vector<double> raw_sales;
    std::optional<NormalizationStats> stats;

    std::size_t rows() const noexcept { return dates.size(); }
};

FeatureMatrix encode_cyclic(const SeriesTable& table);

/// Contiguous half-open row range [begin, end).
struct RowRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const noexcept { return end - begin; }
};

/// Mean and population standard deviation of raw sales over `rows`.
NormalizationStats fit_stats(const FeatureMatrix& fm, RowRange rows);
/// Replaces column 0 by (sales - mean) / stddev; stats default to the given range.
FeatureMatrix standardize(const FeatureMatrix& fm, const NormalizationStats& stats);
double inverse_standardize(double z, const NormalizationStats& stats) noexcept;

struct Splits {
    RowRange train;
    RowRange val;
    RowRange test;
};

inline constexpr std::size_t kMinSplitRows = 60;

/// Sequential split: train = floor(f0*N), val = floor(f1*N), test = rest.
Splits split(std::size_t rows, std::array<double, 3> fractions = {0.7, 0.2, 0.1});

enum class SplitTag { kTrain, kVal, kTest };
const char* to_string(SplitTag tag);
SplitTag split_tag_from_string(std::string_view name);

/// Supervised pairs: inputs [N, input_len, 10], targets [N, horizon, 1] of
/// standardized sales. starts[i] is the source row of window i's first input.
struct WindowSet {
    Tensor inputs;
    Tensor targets;
    SplitTag tag = SplitTag::kTrain;
    std::vector<std::size_t> starts;
    std::size_t input_len = 30;
    std::size_t horizon = 30;

    std::size_t size() const noexcept { return starts.size(); }
    /// Windows at the given positions, in that order.
    WindowSet subset(const std::vector<std::size_t>& indices) const;
};

WindowSet make_windows(const FeatureMatrix& fm, RowRange rows, SplitTag tag, std::size_t input_len = 30,
                       std::size_t horizon = 30, std::size_t stride = 1);

/// Writes `<stem>.bin` (little-endian float64 inputs then targets) and
/// `<stem>.json` (shapes, split, starts, stats).
void save_windows(const std::filesystem::path& stem, const WindowSet& windows, const NormalizationStats& stats);
WindowSet load_windows(const std::filesystem::path& stem, NormalizationStats* stats = nullptr);

/// Everything a run needs from one CSV: standardized features, splits and windows.
struct PreparedData {
    SeriesTable table;
    FeatureMatrix features;
    Splits splits;
    NormalizationStats stats;
    WindowSet train;
    WindowSet val;
    WindowSet test;
};

PreparedData prepare(const std::filesystem::path& csv, const IngestOptions& options = {},
                     std::size_t input_len = 30, std::size_t horizon = 30);
PreparedData prepare(SeriesTable table, std::size_t input_len = 30, std::size_t horizon = 30);

/// Options for the seeded stand-in series used when the retail dataset is not
/// available: Poisson daily counts around a weekly profile, a mid-year seasonal
/// peak, slow growth and holiday uplift.
struct SyntheticOptions {
    std::string first_day = "2013-01-01";
    std::string last_day = "2017-12-31";
    double base_level = 20.0;
    double yearly_amplitude = 0.32;
    double annual_growth = 0.07;
    double holiday_uplift = 0.35;
    std::uint64_t seed = 2013;
};

struct SyntheticSeries {
    SeriesTable table;
    std::vector<Date> holidays;
};

SyntheticSeries generate_synthetic(const SyntheticOptions& options = {});
void write_series_csv(const std::filesystem::path& path, const SeriesTable& table);
void write_holidays(const std::filesystem::path& path, const std::vector<Date>& holidays);

}  // namespace mcdfn
