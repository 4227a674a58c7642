#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcdfn/data.hpp"
#include "mcdfn/training.hpp"

namespace mcdfn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kSeedEnv = "MCDFN_SEED";
inline constexpr std::uint64_t kDefaultSeed = 42;

struct DataOptions {
    std::string data;
    std::string holidays;
    bool fill_gaps = false;
};

struct TrainOptions {
    std::string config;
    std::uint64_t seed = kDefaultSeed;
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    double learning_rate = 0.0;
    std::size_t patience = 0;
};

/// Defaults, then the seed environment variable, then the JSON config file,
/// then explicit flags.
TrainConfig resolve_train_config(const TrainOptions& opt, bool seed_flag_given);
json train_config_json(const TrainConfig& cfg);

PreparedData load_data(const DataOptions& opt);
json data_json(const DataOptions& opt);

/// Records the command, its resolved configuration and the files it wrote.
class RunManifest {
public:
    RunManifest(std::string command, fs::path out_dir);

    json& config() { return config_; }
    /// Writes `contents` atomically under the output directory.
    void write(const std::string& name, const std::string& contents);
    fs::path path(const std::string& name) const { return out_ / name; }
    void record(const std::string& name);
    void finish() const;

private:
    std::string command_;
    fs::path out_;
    json config_ = json::object();
    std::vector<std::string> outputs_;
};

/// Aligned plain-text rendering of a CSV document.
std::string pretty_table(const std::string& csv);

std::string hash_file(const fs::path& path);

}  // namespace mcdfn::cli
