#pragma once

#include <filesystem>
#include <string>

#include "mcdfn/data.hpp"
#include "mcdfn/network.hpp"

namespace mcdfn {

inline constexpr std::string_view kWeightsMagic = "MCDFN1";

/// Container layout: the 6-byte magic, the manifest length as a little-endian
/// uint64, the JSON manifest, then the parameter payload. Manifest offsets are
/// relative to the first payload byte.
struct WeightsFile {
    Network net;
    NormalizationStats stats;
    /// Resolved run configuration as JSON text.
    std::string config;
    std::string config_hash;
    std::size_t value_bits = 64;
    std::size_t param_count = 0;
};

std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& text);

/// value_bits is 64 or 32.
std::string encode_weights(const Network& net, const NormalizationStats& stats, const std::string& config = "{}",
                           std::size_t value_bits = 64);
WeightsFile decode_weights(const std::string& bytes);

void save_weights(const std::filesystem::path& path, const Network& net, const NormalizationStats& stats,
                  const std::string& config = "{}", std::size_t value_bits = 64);
WeightsFile load_weights(const std::filesystem::path& path);

}  // namespace mcdfn
