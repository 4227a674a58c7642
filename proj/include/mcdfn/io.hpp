#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcdfn {

/// Shortest decimal text that round-trips, independent of the C locale.
std::string format_double(double value);
/// Fixed-point text with `digits` decimals, independent of the C locale.
std::string format_fixed(double value, int digits);
std::optional<double> parse_double(std::string_view text);

/// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// Splits one CSV record on commas, honoring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

/// Accumulates a CSV document row by row.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);
    void add_row(std::vector<std::string> cells);
    std::size_t rows() const noexcept { return rows_.size(); }
    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Keeps freed buffers in the process heap so large, short-lived tensors do
/// not fault fresh pages on every allocation. No-op outside glibc.
void retain_freed_memory();

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace mcdfn
