#include "cli_support.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <sstream>

#include "mcdfn/errors.hpp"
#include "mcdfn/io.hpp"

namespace mcdfn::cli {

namespace {

std::uint64_t parse_seed(const std::string& text, const char* origin) {
    std::uint64_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        fail(ErrorKind::kConfig, std::string(origin) + ": seed '" + text + "' is not a non-negative integer");
    }
    return value;
}

}  // namespace

TrainConfig resolve_train_config(const TrainOptions& opt, bool seed_flag_given) {
    TrainConfig cfg;
    if (const char* env = std::getenv(kSeedEnv); env && *env) cfg.seed = parse_seed(env, kSeedEnv);
    if (!opt.config.empty()) {
        json j;
        try {
            j = json::parse(read_file(opt.config));
            if (!j.is_object()) fail(ErrorKind::kConfig, opt.config + ": expected a JSON object");
            cfg.batch_size = j.value("batch_size", cfg.batch_size);
            cfg.epochs = j.value("epochs", cfg.epochs);
            cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
            cfg.beta1 = j.value("beta1", cfg.beta1);
            cfg.beta2 = j.value("beta2", cfg.beta2);
            cfg.epsilon = j.value("epsilon", cfg.epsilon);
            cfg.patience = j.value("patience", cfg.patience);
            cfg.seed = j.value("seed", cfg.seed);
        } catch (const json::exception& e) {
            fail(ErrorKind::kConfig, opt.config + ": " + e.what());
        }
    }
    if (opt.epochs) cfg.epochs = opt.epochs;
    if (opt.batch_size) cfg.batch_size = opt.batch_size;
    if (opt.learning_rate > 0.0) cfg.learning_rate = opt.learning_rate;
    if (opt.patience) cfg.patience = opt.patience;
    if (seed_flag_given) cfg.seed = opt.seed;
    cfg.validate();
    return cfg;
}

json train_config_json(const TrainConfig& cfg) {
    return {{"batch_size", cfg.batch_size}, {"epochs", cfg.epochs},     {"learning_rate", cfg.learning_rate},
            {"beta1", cfg.beta1},           {"beta2", cfg.beta2},       {"epsilon", cfg.epsilon},
            {"patience", cfg.patience},     {"seed", cfg.seed}};
}

PreparedData load_data(const DataOptions& opt) {
    if (opt.data.empty()) fail(ErrorKind::kConfig, "--data is required");
    IngestOptions ingest;
    if (!opt.holidays.empty()) ingest.holidays = opt.holidays;
    ingest.gaps = opt.fill_gaps ? GapPolicy::kForwardFill : GapPolicy::kReject;
    return prepare(opt.data, ingest);
}

std::string hash_file(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

json data_json(const DataOptions& opt) {
    json j = {{"data", opt.data}, {"data_fnv1a64", hash_file(opt.data)}, {"fill_gaps", opt.fill_gaps}};
    if (!opt.holidays.empty()) {
        j["holidays"] = opt.holidays;
        j["holidays_fnv1a64"] = hash_file(opt.holidays);
    }
    return j;
}

RunManifest::RunManifest(std::string command, fs::path out_dir)
    : command_(std::move(command)), out_(std::move(out_dir)) {}

void RunManifest::write(const std::string& name, const std::string& contents) {
    write_atomic(out_ / name, contents);
    record(name);
}

void RunManifest::record(const std::string& name) {
    if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
}

void RunManifest::finish() const {
    const json m = {{"command", command_}, {"config", config_}, {"outputs", outputs_}};
    write_atomic(out_ / "manifest.json", m.dump(2) + "\n");
}

std::string pretty_table(const std::string& csv) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(csv);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) rows.push_back(split_csv_line(line));
    std::vector<std::size_t> width;
    for (const auto& r : rows) {
        if (width.size() < r.size()) width.resize(r.size(), 0);
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    std::string out;
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) line += "  ";
            line += r[i];
            if (i + 1 < r.size()) line.append(width[i] - r[i].size(), ' ');
        }
        out += line + "\n";
    }
    return out;
}

}  // namespace mcdfn::cli
