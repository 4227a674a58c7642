#include "mcdfn/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mcdfn/errors.hpp"
#include "mcdfn/io.hpp"

namespace mcdfn {

namespace {

using namespace std::chrono;

bool all_digits(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int to_int(std::string_view s) {
    int v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    return v;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::kIngest, "cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    if (!lines.empty() && lines.front().rfind("\xEF\xBB\xBF", 0) == 0) lines.front().erase(0, 3);
    return lines;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line) + ": ";
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
    text = trim(text);
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    const auto ys = text.substr(0, 4), ms = text.substr(5, 2), ds = text.substr(8, 2);
    if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds)) return std::nullopt;
    const year_month_day ymd{year{to_int(ys)}, month{static_cast<unsigned>(to_int(ms))},
                             day{static_cast<unsigned>(to_int(ds))}};
    if (!ymd.ok()) return std::nullopt;
    return sys_days{ymd};
}

std::string format_date(Date date) {
    const year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::int64_t unix_seconds(Date date) {
    return static_cast<std::int64_t>(date.time_since_epoch().count()) * 86400;
}

std::vector<Date> read_holidays(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    std::vector<Date> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto s = trim(lines[i]);
        if (s.empty() || s.front() == '#') continue;
        const auto d = parse_date(s);
        if (!d) fail(ErrorKind::kIngest, where(path, i + 1) + "invalid holiday date '" + std::string(s) + "'");
        out.push_back(*d);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

SeriesTable ingest_csv(const std::filesystem::path& path, const IngestOptions& options) {
    const auto lines = read_lines(path);
    std::size_t header_line = 0;
    while (header_line < lines.size() && trim(lines[header_line]).empty()) ++header_line;
    if (header_line == lines.size()) fail(ErrorKind::kIngest, path.string() + ": empty file");

    const auto header = split_csv_line(lines[header_line]);
    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (trim(header[i]) == name) return i;
        return std::nullopt;
    };
    const auto date_col = column(options.date_column);
    const auto sales_col = column(options.sales_column);
    if (!date_col) fail(ErrorKind::kIngest, path.string() + ": no column '" + options.date_column + "'");
    if (!sales_col) fail(ErrorKind::kIngest, path.string() + ": no column '" + options.sales_column + "'");
    const auto flag_col = column("is_holiday");

    std::map<Date, std::pair<double, std::uint8_t>> rows;
    for (std::size_t i = header_line + 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto cells = split_csv_line(lines[i]);
        const std::size_t need = std::max({*date_col, *sales_col, flag_col.value_or(0)}) + 1;
        if (cells.size() < need) {
            fail(ErrorKind::kIngest, where(path, i + 1) + "expected " + std::to_string(header.size()) +
                                         " fields, found " + std::to_string(cells.size()));
        }
        const auto d = parse_date(cells[*date_col]);
        if (!d) fail(ErrorKind::kIngest, where(path, i + 1) + "invalid date '" + cells[*date_col] + "'");
        const auto v = parse_double(cells[*sales_col]);
        if (!v || !std::isfinite(*v) || *v < 0.0) {
            fail(ErrorKind::kIngest, where(path, i + 1) + "invalid sales value '" + cells[*sales_col] + "'");
        }
        std::uint8_t flag = 0;
        if (flag_col) {
            const auto f = parse_double(cells[*flag_col]);
            if (!f || (*f != 0.0 && *f != 1.0)) {
                fail(ErrorKind::kIngest, where(path, i + 1) + "is_holiday must be 0 or 1");
            }
            flag = *f != 0.0;
        }
        if (!rows.emplace(*d, std::make_pair(*v, flag)).second) {
            fail(ErrorKind::kIngest, where(path, i + 1) + "duplicate date " + format_date(*d));
        }
    }
    if (rows.empty()) fail(ErrorKind::kIngest, path.string() + ": no data rows");

    std::set<Date> calendar;
    if (options.holidays) {
        const auto h = read_holidays(*options.holidays);
        calendar.insert(h.begin(), h.end());
    }

    SeriesTable table;
    Date prev{};
    for (const auto& [date, row] : rows) {
        if (!table.dates.empty() && date != prev + days{1}) {
            if (options.gaps == GapPolicy::kReject) {
                fail(ErrorKind::kIngest, path.string() + ": missing dates between " + format_date(prev) + " and " +
                                             format_date(date));
            }
            for (Date fill = prev + days{1}; fill < date; fill += days{1}) {
                table.dates.push_back(fill);
                table.sales.push_back(table.sales.back());
                table.holiday.push_back(options.holidays ? static_cast<std::uint8_t>(calendar.count(fill)) : 0);
            }
        }
        table.dates.push_back(date);
        table.sales.push_back(row.first);
        table.holiday.push_back(options.holidays ? static_cast<std::uint8_t>(calendar.count(date)) : row.second);
        prev = date;
    }
    return table;
}

std::size_t feature_index(std::string_view name) {
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (kFeatureNames[i] == name) return i;
    fail(ErrorKind::kConfig, "unknown feature '" + std::string(name) + "'");
}

FeatureMatrix encode_cyclic(const SeriesTable& table) {
    const std::size_t n = table.size();
    if (n == 0) fail(ErrorKind::kData, "empty series");
    if (table.sales.size() != n || table.holiday.size() != n) fail(ErrorKind::kData, "series columns differ in length");
    FeatureMatrix fm;
    fm.values = Tensor({n, kFeatureCount});
    fm.dates = table.dates;
    fm.raw_sales = table.sales;
    for (std::size_t r = 0; r < n; ++r) {
        const year_month_day ymd{table.dates[r]};
        const double dom = static_cast<unsigned>(ymd.day());
        const double mon = static_cast<unsigned>(ymd.month());
        const double ts = static_cast<double>(unix_seconds(table.dates[r]));
        const double a_day = dom * kTwoPi / kDayCycle;
        const double a_week = ts * kTwoPi / kWeekSeconds;
        const double a_month = mon * kTwoPi / kMonthCycle;
        const double a_year = ts * kTwoPi / kYearSeconds;
        double* row = fm.values.data() + r * kFeatureCount;
        row[0] = table.sales[r];
        row[1] = table.holiday[r] ? 1.0 : 0.0;
        row[2] = std::sin(a_day);
        row[3] = std::cos(a_day);
        row[4] = std::sin(a_week);
        row[5] = std::cos(a_week);
        row[6] = std::sin(a_month);
        row[7] = std::cos(a_month);
        row[8] = std::sin(a_year);
        row[9] = std::cos(a_year);
    }
    return fm;
}

NormalizationStats fit_stats(const FeatureMatrix& fm, RowRange rows) {
    if (rows.end > fm.raw_sales.size() || rows.begin >= rows.end) fail(ErrorKind::kData, "invalid row range");
    const double n = static_cast<double>(rows.size());
    double sum = 0.0;
    for (std::size_t i = rows.begin; i < rows.end; ++i) sum += fm.raw_sales[i];
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t i = rows.begin; i < rows.end; ++i) {
        const double d = fm.raw_sales[i] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) fail(ErrorKind::kDegenerate, "sales have zero variance over the fitting rows");
    return {mean, sd};
}

FeatureMatrix standardize(const FeatureMatrix& fm, const NormalizationStats& stats) {
    if (!(stats.stddev > 0.0) || !std::isfinite(stats.stddev)) {
        fail(ErrorKind::kDegenerate, "standard deviation must be positive");
    }
    FeatureMatrix out = fm;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        out.values.data()[r * kFeatureCount] = (fm.raw_sales[r] - stats.mean) / stats.stddev;
    }
    out.stats = stats;
    return out;
}

double inverse_standardize(double z, const NormalizationStats& stats) noexcept {
    return z * stats.stddev + stats.mean;
}

Splits split(std::size_t rows, std::array<double, 3> fractions) {
    for (double f : fractions) {
        if (!(f >= 0.0 && f <= 1.0)) fail(ErrorKind::kConfig, "split fractions must lie in [0, 1]");
    }
    if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
        fail(ErrorKind::kConfig, "split fractions must sum to 1");
    }
    const double n = static_cast<double>(rows);
    const auto train = static_cast<std::size_t>(std::floor(fractions[0] * n + 1e-9));
    const auto val = static_cast<std::size_t>(std::floor(fractions[1] * n + 1e-9));
    if (train + val > rows) fail(ErrorKind::kSplit, "split fractions exceed the series length");
    Splits s{{0, train}, {train, train + val}, {train + val, rows}};
    const std::pair<const char*, RowRange> parts[] = {{"train", s.train}, {"val", s.val}, {"test", s.test}};
    for (const auto& [name, range] : parts) {
        if (range.size() < kMinSplitRows) {
            fail(ErrorKind::kSplit, std::string(name) + " split has " + std::to_string(range.size()) +
                                        " rows, fewer than " + std::to_string(kMinSplitRows));
        }
    }
    return s;
}

const char* to_string(SplitTag tag) {
    switch (tag) {
        case SplitTag::kTrain: return "train";
        case SplitTag::kVal: return "val";
        case SplitTag::kTest: return "test";
    }
    return "?";
}

SplitTag split_tag_from_string(std::string_view name) {
    if (name == "train") return SplitTag::kTrain;
    if (name == "val") return SplitTag::kVal;
    if (name == "test") return SplitTag::kTest;
    fail(ErrorKind::kConfig, "unknown split '" + std::string(name) + "'");
}

WindowSet WindowSet::subset(const std::vector<std::size_t>& indices) const {
    WindowSet out;
    out.tag = tag;
    out.input_len = input_len;
    out.horizon = horizon;
    const std::size_t f = inputs.empty() ? kFeatureCount : inputs.dim(2);
    const std::size_t in_stride = input_len * f;
    out.inputs = Tensor({std::max<std::size_t>(indices.size(), 1), input_len, f});
    out.targets = Tensor({std::max<std::size_t>(indices.size(), 1), horizon, 1});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        if (i >= size()) fail(ErrorKind::kWindow, "window index " + std::to_string(i) + " out of range");
        std::memcpy(out.inputs.data() + k * in_stride, inputs.data() + i * in_stride, in_stride * sizeof(double));
        std::memcpy(out.targets.data() + k * horizon, targets.data() + i * horizon, horizon * sizeof(double));
        out.starts.push_back(starts[i]);
    }
    if (indices.empty()) {
        out.inputs = Tensor();
        out.targets = Tensor();
    }
    return out;
}

WindowSet make_windows(const FeatureMatrix& fm, RowRange rows, SplitTag tag, std::size_t input_len,
                       std::size_t horizon, std::size_t stride) {
    if (input_len == 0 || horizon == 0 || stride == 0) fail(ErrorKind::kConfig, "window sizes must be positive");
    if (rows.end > fm.rows() || rows.begin > rows.end) fail(ErrorKind::kWindow, "row range outside the feature matrix");
    const std::size_t span = input_len + horizon;
    if (rows.size() < span) {
        fail(ErrorKind::kWindow, std::string(to_string(tag)) + " range has " + std::to_string(rows.size()) +
                                     " rows, windows need " + std::to_string(span));
    }
    const std::size_t count = (rows.size() - span) / stride + 1;
    const std::size_t f = fm.values.dim(1);
    WindowSet w;
    w.tag = tag;
    w.input_len = input_len;
    w.horizon = horizon;
    w.inputs = Tensor({count, input_len, f});
    w.targets = Tensor({count, horizon, 1});
    const double* src = fm.values.data();
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = rows.begin + i * stride;
        w.starts.push_back(start);
        std::memcpy(w.inputs.data() + i * input_len * f, src + start * f, input_len * f * sizeof(double));
        for (std::size_t h = 0; h < horizon; ++h) w.targets.data()[i * horizon + h] = src[(start + input_len + h) * f];
    }
    return w;
}

namespace {

void put_le(std::string& out, const double* values, std::size_t n) {
    const std::size_t offset = out.size();
    out.resize(offset + n * 8);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
        for (int b = 0; b < 8; ++b) out[offset + i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
}

void get_le(const std::string& in, std::size_t offset, double* values, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i * 8 + b])) << (8 * b);
        values[i] = std::bit_cast<double>(bits);
    }
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return stem.string() + suffix;
}

}  // namespace

void save_windows(const std::filesystem::path& stem, const WindowSet& windows, const NormalizationStats& stats) {
    std::string blob;
    blob.reserve((windows.inputs.size() + windows.targets.size()) * 8);
    put_le(blob, windows.inputs.data(), windows.inputs.size());
    put_le(blob, windows.targets.data(), windows.targets.size());
    nlohmann::json meta;
    meta["format"] = "float64-le";
    meta["split"] = to_string(windows.tag);
    meta["count"] = windows.size();
    meta["input_shape"] = windows.inputs.shape();
    meta["target_shape"] = windows.targets.shape();
    meta["input_len"] = windows.input_len;
    meta["horizon"] = windows.horizon;
    meta["starts"] = windows.starts;
    meta["stats"] = {{"mean", stats.mean}, {"stddev", stats.stddev}};
    meta["features"] = std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end());
    write_atomic(with_suffix(stem, ".bin"), blob);
    write_atomic(with_suffix(stem, ".json"), meta.dump(2) + "\n");
}

WindowSet load_windows(const std::filesystem::path& stem, NormalizationStats* stats) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file(with_suffix(stem, ".json")));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::kIo, "malformed window sidecar " + with_suffix(stem, ".json").string() + ": " + e.what());
    }
    try {
        WindowSet w;
        w.tag = split_tag_from_string(meta.at("split").get<std::string>());
        w.input_len = meta.at("input_len").get<std::size_t>();
        w.horizon = meta.at("horizon").get<std::size_t>();
        w.starts = meta.at("starts").get<std::vector<std::size_t>>();
        const auto in_shape = meta.at("input_shape").get<Shape>();
        const auto tg_shape = meta.at("target_shape").get<Shape>();
        w.inputs = Tensor(in_shape);
        w.targets = Tensor(tg_shape);
        const std::string blob = read_file(with_suffix(stem, ".bin"));
        if (blob.size() != (w.inputs.size() + w.targets.size()) * 8) {
            fail(ErrorKind::kIo, "window blob size does not match its sidecar");
        }
        get_le(blob, 0, w.inputs.data(), w.inputs.size());
        get_le(blob, w.inputs.size() * 8, w.targets.data(), w.targets.size());
        if (stats) {
            stats->mean = meta.at("stats").at("mean").get<double>();
            stats->stddev = meta.at("stats").at("stddev").get<double>();
        }
        return w;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::kIo, "malformed window sidecar: " + std::string(e.what()));
    }
}

PreparedData prepare(const std::filesystem::path& csv, const IngestOptions& options, std::size_t input_len,
                     std::size_t horizon) {
    return prepare(ingest_csv(csv, options), input_len, horizon);
}

PreparedData prepare(SeriesTable table, std::size_t input_len, std::size_t horizon) {
    PreparedData d;
    d.table = std::move(table);
    const FeatureMatrix raw = encode_cyclic(d.table);
    d.splits = split(raw.rows());
    d.stats = fit_stats(raw, d.splits.train);
    d.features = standardize(raw, d.stats);
    d.train = make_windows(d.features, d.splits.train, SplitTag::kTrain, input_len, horizon);
    d.val = make_windows(d.features, d.splits.val, SplitTag::kVal, input_len, horizon);
    d.test = make_windows(d.features, d.splits.test, SplitTag::kTest, input_len, horizon);
    return d;
}

namespace {

std::vector<Date> holiday_calendar(Date first, Date last) {
    static constexpr std::pair<unsigned, unsigned> kFixed[] = {{2, 21}, {3, 17}, {3, 26}, {4, 14},
                                                               {5, 1},  {8, 15}, {12, 16}, {12, 25}};
    static constexpr const char* kFitr[] = {"2013-08-08", "2014-07-28", "2015-07-17", "2016-07-06", "2017-06-25"};
    static constexpr const char* kAdha[] = {"2013-10-15", "2014-10-05", "2015-09-24", "2016-09-12", "2017-09-01"};
    std::set<Date> days_off;
    const int y0 = static_cast<int>(year_month_day{first}.year());
    const int y1 = static_cast<int>(year_month_day{last}.year());
    for (int y = y0; y <= y1; ++y) {
        for (const auto& [m, d] : kFixed) days_off.insert(sys_days{year{y} / month{m} / day{d}});
    }
    for (const auto* list : {kFitr, kAdha}) {
        for (int i = 0; i < 5; ++i) {
            const Date start = *parse_date(list[i]);
            for (int k = 0; k < 3; ++k) days_off.insert(start + days{k});
        }
    }
    std::vector<Date> out;
    for (Date d : days_off)
        if (d >= first && d <= last) out.push_back(d);
    return out;
}

std::uint64_t poisson(RandomSource& rng, double lambda) {
    double p = std::exp(-lambda);
    double cdf = p;
    const double u = rng.uniform();
    std::uint64_t k = 0;
    while (u > cdf && p > 0.0) {
        ++k;
        p *= lambda / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

}  // namespace

SyntheticSeries generate_synthetic(const SyntheticOptions& options) {
    const auto first = parse_date(options.first_day);
    const auto last = parse_date(options.last_day);
    if (!first || !last || *last < *first) fail(ErrorKind::kConfig, "invalid synthetic date range");
    if (!(options.base_level > 0.0) || options.yearly_amplitude < 0.0 || options.yearly_amplitude >= 1.0) {
        fail(ErrorKind::kConfig, "invalid synthetic level or amplitude");
    }
    // Monday first.
    static constexpr double kWeekly[7] = {0.84, 0.95, 0.97, 1.01, 1.06, 1.13, 1.19};
    double weekly_mean = 0.0;
    for (double w : kWeekly) weekly_mean += w / 7.0;

    SyntheticSeries out;
    out.holidays = holiday_calendar(*first, *last);
    const std::set<Date> off(out.holidays.begin(), out.holidays.end());
    RandomSource rng = RandomSource(options.seed).child("synthetic-sales");
    const double mid = (first->time_since_epoch().count() + last->time_since_epoch().count()) / 2.0;
    for (Date d = *first; d <= *last; d += days{1}) {
        const year_month_day ymd{d};
        const double doy = static_cast<double>((d - sys_days{ymd.year() / January / 1}).count());
        const unsigned dow = weekday{d}.iso_encoding() - 1;
        const double t = (d.time_since_epoch().count() - mid) / 365.25;
        const bool holiday = off.count(d) > 0;
        const double lambda = options.base_level * std::pow(1.0 + options.annual_growth, t) *
                              (1.0 - options.yearly_amplitude * std::cos(kTwoPi * doy / 365.2425)) *
                              (kWeekly[dow] / weekly_mean) * (holiday ? 1.0 + options.holiday_uplift : 1.0);
        out.table.dates.push_back(d);
        out.table.sales.push_back(static_cast<double>(poisson(rng, lambda)));
        out.table.holiday.push_back(holiday ? 1 : 0);
    }
    return out;
}

void write_series_csv(const std::filesystem::path& path, const SeriesTable& table) {
    CsvTable csv({"date", "sales"});
    for (std::size_t i = 0; i < table.size(); ++i) csv.add_row({format_date(table.dates[i]), format_double(table.sales[i])});
    write_atomic(path, csv.str());
}

void write_holidays(const std::filesystem::path& path, const std::vector<Date>& holidays) {
    std::string out;
    for (Date d : holidays) out += format_date(d) + "\n";
    write_atomic(path, out);
}

}  // namespace mcdfn
