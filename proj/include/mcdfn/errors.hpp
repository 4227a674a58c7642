#pragma once

#include <stdexcept>
#include <string>

namespace mcdfn {

/// Category of a library failure. The CLI maps categories onto exit codes:
/// numeric and statistical degeneracies exit with 3, everything else with 2.
enum class ErrorKind {
    kDimension,
    kConfig,
    kNumeric,
    kIngest,
    kSplit,
    kWindow,
    kData,
    kMetric,
    kDegenerate,
    kBudget,
    kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    bool is_numeric() const noexcept {
        return kind_ == ErrorKind::kNumeric || kind_ == ErrorKind::kDegenerate;
    }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kDimension: return "dimension";
        case ErrorKind::kConfig: return "config";
        case ErrorKind::kNumeric: return "numeric";
        case ErrorKind::kIngest: return "ingest";
        case ErrorKind::kSplit: return "split";
        case ErrorKind::kWindow: return "window";
        case ErrorKind::kData: return "data";
        case ErrorKind::kMetric: return "metric";
        case ErrorKind::kDegenerate: return "degenerate";
        case ErrorKind::kBudget: return "budget";
        case ErrorKind::kIo: return "io";
    }
    return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace mcdfn
