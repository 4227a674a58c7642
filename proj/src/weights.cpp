#include "mcdfn/weights.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "mcdfn/errors.hpp"
#include "mcdfn/io.hpp"

namespace mcdfn {

namespace {

using nlohmann::json;

LayerKind kind_from_string(const std::string& name) {
    for (LayerKind k : {LayerKind::kDense, LayerKind::kConv1D, LayerKind::kPool1D, LayerKind::kSimpleRNN,
                        LayerKind::kLSTM, LayerKind::kGRU, LayerKind::kBidirectional, LayerKind::kDropout,
                        LayerKind::kFlatten, LayerKind::kReshape}) {
        if (name == to_string(k)) return k;
    }
    fail(ErrorKind::kIo, "unknown layer kind '" + name + "' in weights manifest");
}

json layer_to_json(const LayerConfig& c) {
    return {{"kind", to_string(c.kind)},
            {"units", c.units},
            {"kernel_size", c.kernel_size},
            {"pool_size", c.pool_size},
            {"pool_mode", c.pool_mode == PoolMode::kMax ? "max" : "avg"},
            {"activation", to_string(c.activation)},
            {"recurrent_activation", to_string(c.recurrent_activation)},
            {"dropout", c.dropout},
            {"return_sequences", c.return_sequences},
            {"inner", to_string(c.inner)},
            {"reset_after", c.reset_after},
            {"zero_kernel", c.zero_kernel},
            {"target_shape", c.target_shape}};
}

LayerConfig layer_from_json(const json& j) {
    LayerConfig c;
    c.kind = kind_from_string(j.at("kind").get<std::string>());
    c.units = j.at("units").get<std::size_t>();
    c.kernel_size = j.at("kernel_size").get<std::size_t>();
    c.pool_size = j.at("pool_size").get<std::size_t>();
    c.pool_mode = j.at("pool_mode").get<std::string>() == "max" ? PoolMode::kMax : PoolMode::kAvg;
    c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.recurrent_activation = activation_from_string(j.at("recurrent_activation").get<std::string>());
    c.dropout = j.at("dropout").get<double>();
    c.return_sequences = j.at("return_sequences").get<bool>();
    c.inner = kind_from_string(j.at("inner").get<std::string>());
    c.reset_after = j.at("reset_after").get<bool>();
    c.zero_kernel = j.at("zero_kernel").get<bool>();
    c.target_shape = j.at("target_shape").get<Shape>();
    return c;
}

json spec_json(const NetworkSpec& spec) {
    json branches = json::array();
    for (const auto& b : spec.branches) {
        json layers = json::array();
        for (const auto& l : b.layers) layers.push_back(layer_to_json(l));
        branches.push_back({{"name", b.name}, {"layers", layers}});
    }
    json head = json::array();
    for (const auto& l : spec.head) head.push_back(layer_to_json(l));
    return {{"name", spec.name}, {"input", spec.input}, {"horizon", spec.horizon}, {"branches", branches},
            {"head", head}};
}

NetworkSpec spec_parse(const json& j) {
    NetworkSpec s;
    s.name = j.at("name").get<std::string>();
    s.input = j.at("input").get<Shape>();
    s.horizon = j.at("horizon").get<std::size_t>();
    for (const auto& b : j.at("branches")) {
        BranchSpec bs;
        bs.name = b.at("name").get<std::string>();
        for (const auto& l : b.at("layers")) bs.layers.push_back(layer_from_json(l));
        s.branches.push_back(std::move(bs));
    }
    for (const auto& l : j.at("head")) s.head.push_back(layer_from_json(l));
    return s;
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
    return v;
}

}  // namespace

std::string spec_to_json(const NetworkSpec& spec) { return spec_json(spec).dump(); }

NetworkSpec spec_from_json(const std::string& text) {
    try {
        return spec_parse(json::parse(text));
    } catch (const json::exception& e) {
        fail(ErrorKind::kIo, std::string("malformed network spec: ") + e.what());
    }
}

std::string encode_weights(const Network& net, const NormalizationStats& stats, const std::string& config,
                           std::size_t value_bits) {
    if (value_bits != 64 && value_bits != 32) fail(ErrorKind::kConfig, "value width must be 32 or 64 bits");
    json cfg;
    try {
        cfg = json::parse(config);
    } catch (const json::exception& e) {
        fail(ErrorKind::kConfig, std::string("run configuration is not valid JSON: ") + e.what());
    }
    const std::string canonical = cfg.dump();
    const auto params = net.parameters();
    const auto names = net.parameter_names();
    const std::size_t width = value_bits / 8;

    std::string payload;
    json layers = json::array();
    std::size_t total = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& p = *params[i];
        layers.push_back({{"name", names[i]}, {"shape", p.shape()}, {"offset", payload.size()},
                          {"bytes", p.size() * width}});
        total += p.size();
        for (double v : p.values()) {
            const std::uint64_t bits = value_bits == 64 ? std::bit_cast<std::uint64_t>(v)
                                                        : std::bit_cast<std::uint32_t>(static_cast<float>(v));
            for (std::size_t b = 0; b < width; ++b) payload.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
        }
    }
    const json manifest = {{"model", net.name()},
                           {"value_bits", value_bits},
                           {"endianness", "little"},
                           {"param_count", total},
                           {"payload_bytes", payload.size()},
                           {"parameters", layers},
                           {"spec", spec_json(net.spec())},
                           {"stats", {{"mean", stats.mean}, {"stddev", stats.stddev}}},
                           {"config", cfg},
                           {"config_hash", hex64(fnv1a64(canonical))}};
    const std::string text = manifest.dump(2);
    std::string out(kWeightsMagic);
    put_u64(out, text.size());
    out += text;
    out += payload;
    return out;
}

WeightsFile decode_weights(const std::string& bytes) {
    const std::size_t head = kWeightsMagic.size() + 8;
    if (bytes.size() < head || bytes.compare(0, kWeightsMagic.size(), kWeightsMagic) != 0) {
        fail(ErrorKind::kIo, "not an MCDFN1 weights file");
    }
    const std::uint64_t len = get_u64(bytes, kWeightsMagic.size());
    if (len > bytes.size() - head) fail(ErrorKind::kIo, "truncated weights manifest");
    try {
        const json m = json::parse(bytes.substr(head, len));
        const std::size_t start = head + len;
        const std::size_t bits = m.at("value_bits").get<std::size_t>();
        if ((bits != 64 && bits != 32) || m.at("endianness").get<std::string>() != "little") {
            fail(ErrorKind::kIo, "unsupported weights encoding");
        }
        WeightsFile wf{Network(spec_parse(m.at("spec"))),
                       {m.at("stats").at("mean").get<double>(), m.at("stats").at("stddev").get<double>()},
                       m.at("config").dump(),
                       m.at("config_hash").get<std::string>(),
                       bits,
                       m.at("param_count").get<std::size_t>()};
        const auto params = wf.net.parameters();
        const auto& entries = m.at("parameters");
        if (entries.size() != params.size()) fail(ErrorKind::kIo, "weights manifest lists the wrong parameter count");
        const std::size_t width = bits / 8;
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            if (entries[i].at("shape").get<Shape>() != p.shape()) {
                fail(ErrorKind::kIo, "parameter " + entries[i].at("name").get<std::string>() + " has shape " +
                                         shape_to_string(entries[i].at("shape").get<Shape>()) + ", expected " +
                                         shape_to_string(p.shape()));
            }
            const std::size_t off = start + entries[i].at("offset").get<std::size_t>();
            if (off + p.size() * width > bytes.size()) fail(ErrorKind::kIo, "truncated weights payload");
            double* dst = p.data();
            for (std::size_t k = 0; k < p.size(); ++k) {
                std::uint64_t v = 0;
                for (std::size_t b = 0; b < width; ++b)
                    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[off + k * width + b])) << (8 * b);
                dst[k] = bits == 64 ? std::bit_cast<double>(v)
                                    : static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(v)));
            }
        }
        return wf;
    } catch (const json::exception& e) {
        fail(ErrorKind::kIo, std::string("malformed weights manifest: ") + e.what());
    }
}

void save_weights(const std::filesystem::path& path, const Network& net, const NormalizationStats& stats,
                  const std::string& config, std::size_t value_bits) {
    write_atomic(path, encode_weights(net, stats, config, value_bits));
}

WeightsFile load_weights(const std::filesystem::path& path) { return decode_weights(read_file(path)); }

}  // namespace mcdfn
