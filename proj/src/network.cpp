#include "mcdfn/network.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

namespace mcdfn {

const char* to_string(Branch branch) {
    switch (branch) {
        case Branch::kCNN: return "CNN";
        case Branch::kBiLSTM: return "BiLSTM";
        case Branch::kBiGRU: return "BiGRU";
        case Branch::kStackedLSTM: return "StackedLSTM";
    }
    return "?";
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

struct AblationRow {
    std::string name;
    std::set<Branch> excluded;
};

const std::vector<AblationRow>& ablation_rows() {
    static const std::vector<AblationRow> rows = {
        {"w/o BiLSTM", {Branch::kBiLSTM}},
        {"w/o CNN", {Branch::kCNN}},
        {"w/o BiGRU", {Branch::kBiGRU}},
        {"w/o StackedLSTM", {Branch::kStackedLSTM}},
        {"w/o BiLSTM+CNN", {Branch::kBiLSTM, Branch::kCNN}},
        {"w/o CNN+BiGRU", {Branch::kCNN, Branch::kBiGRU}},
        {"w/o BiGRU+StackedLSTM", {Branch::kBiGRU, Branch::kStackedLSTM}},
        {"w/o StackedLSTM+BiLSTM", {Branch::kStackedLSTM, Branch::kBiLSTM}},
        {"w/o CNN+StackedLSTM", {Branch::kCNN, Branch::kStackedLSTM}},
        {"w/o BiLSTM+BiGRU", {Branch::kBiLSTM, Branch::kBiGRU}},
    };
    return rows;
}

LayerConfig output_head(std::size_t horizon) {
    LayerConfig c = LayerConfig::dense(horizon);
    c.zero_kernel = true;
    return c;
}

}  // namespace

Branch branch_from_string(const std::string& name) {
    const std::string key = lower(trim(name));
    for (Branch b : {Branch::kCNN, Branch::kBiLSTM, Branch::kBiGRU, Branch::kStackedLSTM}) {
        if (lower(to_string(b)) == key) return b;
    }
    if (key == "stacked lstm" || key == "stacked-lstm" || key == "multilayerlstm") return Branch::kStackedLSTM;
    fail(ErrorKind::kConfig, "unknown branch '" + name + "' (expected CNN, BiLSTM, BiGRU or StackedLSTM)");
}

const std::vector<std::string>& model_names() {
    static const std::vector<std::string> names = {"BiLSTM", "CNN",  "RNN", "VanillaLSTM",
                                                   "StackedLSTM", "FCN", "GRU", "MCDFN"};
    return names;
}

std::string canonical_model_name(const std::string& name) {
    const std::string key = lower(trim(name));
    for (const std::string& n : model_names()) {
        if (lower(n) == key) return n;
    }
    for (const AblationRow& row : ablation_rows()) {
        if (lower(row.name) == key) return row.name;
    }
    fail(ErrorKind::kConfig, "unknown model '" + name + "'");
}

ModelOptions default_options(const std::string& model) {
    const std::string name = canonical_model_name(model);
    ModelOptions o;
    if (name == "BiLSTM") {
        o.units = 192;
        o.dropout = 0.2;
    } else if (name == "CNN") {
        o.filters = 64;
        o.kernel = 1;
        o.dense_units = 192;
    } else if (name == "RNN") {
        o.units = 128;
        o.dropout = 0.1;
    } else if (name == "VanillaLSTM") {
        o.units = 480;
    } else if (name == "StackedLSTM") {
        o.units = 512;
        o.units_2 = 512;
        o.dropout = 0.0;
    } else if (name == "FCN") {
        o.dense_units = 512;
        o.activation = Activation::kTanh;
        o.dropout = 0.0;
    } else if (name == "GRU") {
        o.units = 192;
        o.dropout = 0.4;
    } else {
        fail(ErrorKind::kConfig, "'" + name + "' has no single-path options");
    }
    return o;
}

NetworkSpec model_spec(const std::string& model, const ModelOptions& o, Shape input, std::size_t horizon) {
    const std::string name = canonical_model_name(model);
    NetworkSpec spec;
    spec.name = name;
    spec.input = std::move(input);
    spec.horizon = horizon;
    BranchSpec branch{name, {}};
    auto& l = branch.layers;
    spec.head = {output_head(horizon)};
    if (name == "BiLSTM") {
        l = {LayerConfig::bidirectional(LayerKind::kLSTM, o.units), LayerConfig::dropout_layer(o.dropout)};
    } else if (name == "CNN") {
        l = {LayerConfig::conv1d(o.filters, o.kernel, Activation::kRelu), LayerConfig::pool1d(2, PoolMode::kAvg),
             LayerConfig::flatten(), LayerConfig::dense(o.dense_units, Activation::kRelu)};
    } else if (name == "RNN") {
        l = {LayerConfig::simple_rnn(o.units, true), LayerConfig::dropout_layer(o.dropout)};
    } else if (name == "VanillaLSTM") {
        l = {LayerConfig::lstm(o.units, false)};
    } else if (name == "StackedLSTM") {
        l = {LayerConfig::lstm(o.units, true), LayerConfig::dropout_layer(o.dropout),
             LayerConfig::lstm(o.units_2, true)};
    } else if (name == "FCN") {
        LayerConfig out = LayerConfig::dense(1);
        out.zero_kernel = true;
        l = {LayerConfig::dense(o.dense_units, o.activation), LayerConfig::dropout_layer(o.dropout), out};
        spec.head.clear();
    } else if (name == "GRU") {
        l = {LayerConfig::gru(o.units, true), LayerConfig::dropout_layer(o.dropout)};
    } else {
        fail(ErrorKind::kConfig, "'" + name + "' is not a single-path model");
    }
    spec.branches.push_back(std::move(branch));
    return spec;
}

NetworkSpec model_spec(const std::string& name) {
    const std::string canonical = canonical_model_name(name);
    if (canonical == "MCDFN") return mcdfn_spec();
    for (const AblationRow& row : ablation_rows()) {
        if (row.name == canonical) {
            NetworkSpec spec = mcdfn_spec({}, row.excluded);
            return spec;
        }
    }
    return model_spec(canonical, default_options(canonical));
}

NetworkSpec mcdfn_spec(const McdfnOptions& o, const std::set<Branch>& excluded, Shape input, std::size_t horizon) {
    if (excluded.size() >= 4) fail(ErrorKind::kConfig, "cannot exclude every branch of MCDFN");
    NetworkSpec spec;
    spec.name = excluded.empty() ? "MCDFN" : ablation_name(excluded);
    spec.input = std::move(input);
    spec.horizon = horizon;
    if (!excluded.contains(Branch::kCNN)) {
        spec.branches.push_back({"CNN",
                                 {LayerConfig::conv1d(o.conv_filters, o.conv_kernel, Activation::kRelu),
                                  LayerConfig::conv1d(o.conv_filters, o.conv_kernel, Activation::kRelu),
                                  LayerConfig::pool1d(o.pool, PoolMode::kMax),
                                  LayerConfig::dense(o.cnn_dense, Activation::kRelu)}});
    }
    if (!excluded.contains(Branch::kBiLSTM)) {
        spec.branches.push_back({"BiLSTM",
                                 {LayerConfig::bidirectional(LayerKind::kLSTM, o.bilstm_units),
                                  LayerConfig::dropout_layer(o.bilstm_dropout)}});
    }
    if (!excluded.contains(Branch::kBiGRU)) {
        spec.branches.push_back({"BiGRU",
                                 {LayerConfig::bidirectional(LayerKind::kGRU, o.bigru_units),
                                  LayerConfig::dropout_layer(o.bigru_dropout)}});
    }
    if (!excluded.contains(Branch::kStackedLSTM)) {
        spec.branches.push_back({"StackedLSTM",
                                 {LayerConfig::lstm(o.lstm_units_1, true),
                                  LayerConfig::dropout_layer(o.stacked_dropout),
                                  LayerConfig::lstm(o.lstm_units_2, true)}});
    }
    spec.head = {output_head(horizon)};
    return spec;
}

const std::vector<std::set<Branch>>& ablation_variants() {
    static const std::vector<std::set<Branch>> variants = [] {
        std::vector<std::set<Branch>> v;
        for (const AblationRow& row : ablation_rows()) v.push_back(row.excluded);
        return v;
    }();
    return variants;
}

std::string ablation_name(const std::set<Branch>& excluded) {
    if (excluded.empty()) return "MCDFN";
    for (const AblationRow& row : ablation_rows()) {
        if (row.excluded == excluded) return row.name;
    }
    std::string name = "w/o ";
    bool first = true;
    for (Branch b : excluded) {
        if (!first) name += "+";
        name += to_string(b);
        first = false;
    }
    return name;
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
    if (spec_.branches.empty()) fail(ErrorKind::kConfig, "network '" + spec_.name + "' has no branches");
    if (spec_.input.size() != 2) {
        fail(ErrorKind::kDimension, "network input must be [T, features], got " + shape_to_string(spec_.input));
    }
    std::size_t fused = 0;
    for (const BranchSpec& b : spec_.branches) {
        std::vector<std::unique_ptr<Layer>> layers;
        Shape shape = spec_.input;
        for (const LayerConfig& c : b.layers) {
            layers.push_back(make_layer(c, shape));
            shape = layers.back()->output_shape();
        }
        branch_widths_.push_back(shape_size(shape));
        fused += branch_widths_.back();
        branches_.push_back(std::move(layers));
    }
    Shape shape{fused};
    for (const LayerConfig& c : spec_.head) {
        head_.push_back(make_layer(c, shape));
        shape = head_.back()->output_shape();
    }
    if (shape_size(shape) != spec_.horizon) {
        fail(ErrorKind::kDimension, "network '" + spec_.name + "' produces " + shape_to_string(shape) +
                                        " per sample, expected " + std::to_string(spec_.horizon) + " values");
    }
}

Network::~Network() = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const Tensor* p : parameters()) n += p->size();
    return n;
}

void Network::init(const RandomSource& rng) {
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        for (std::size_t i = 0; i < branches_[b].size(); ++i) {
            RandomSource child = rng.child(spec_.branches[b].name + "/" + std::to_string(i));
            branches_[b][i]->init(child);
        }
    }
    for (std::size_t i = 0; i < head_.size(); ++i) {
        RandomSource child = rng.child("head/" + std::to_string(i));
        head_[i]->init(child);
    }
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> out;
    for (auto& branch : branches_) {
        for (auto& layer : branch) {
            for (Tensor& p : layer->params()) out.push_back(&p);
        }
    }
    for (auto& layer : head_) {
        for (Tensor& p : layer->params()) out.push_back(&p);
    }
    return out;
}

std::vector<const Tensor*> Network::parameters() const {
    std::vector<const Tensor*> out;
    for (const auto& branch : branches_) {
        for (const auto& layer : branch) {
            for (const Tensor& p : layer->params()) out.push_back(&p);
        }
    }
    for (const auto& layer : head_) {
        for (const Tensor& p : layer->params()) out.push_back(&p);
    }
    return out;
}

std::vector<std::string> Network::parameter_names() const {
    std::vector<std::string> out;
    auto add = [&out](const std::string& prefix, const Layer& layer) {
        for (const std::string& n : layer.param_names()) out.push_back(prefix + "/" + n);
    };
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        for (std::size_t i = 0; i < branches_[b].size(); ++i) {
            add(spec_.branches[b].name + "/" + std::to_string(i) + "_" + to_string(branches_[b][i]->config().kind),
                *branches_[b][i]);
        }
    }
    for (std::size_t i = 0; i < head_.size(); ++i) {
        add("head/" + std::to_string(i) + "_" + to_string(head_[i]->config().kind), *head_[i]);
    }
    return out;
}

std::vector<Shape> Network::parameter_shapes() const {
    std::vector<Shape> out;
    for (const Tensor* p : parameters()) out.push_back(p->shape());
    return out;
}

std::vector<Tensor> Network::zero_gradients() const {
    std::vector<Tensor> out;
    for (const Tensor* p : parameters()) out.emplace_back(p->shape());
    return out;
}

Tensor Network::check_input(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(1) != spec_.input[0] || x.dim(2) != spec_.input[1]) {
        fail(ErrorKind::kDimension, "network '" + spec_.name + "' expects [B," + std::to_string(spec_.input[0]) +
                                        "," + std::to_string(spec_.input[1]) + "], got " +
                                        shape_to_string(x.shape()));
    }
    return x;
}

Tensor Network::forward(const Tensor& x, const ForwardMode& mode) const {
    check_input(x);
    const std::size_t batch = x.dim(0);
    std::size_t fused_width = 0;
    for (std::size_t w : branch_widths_) fused_width += w;
    Tensor fused({batch, fused_width});
    std::size_t offset = 0;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        Tensor h = x;
        for (const auto& layer : branches_[b]) h = layer->forward(h, mode, nullptr);
        const std::size_t w = branch_widths_[b];
        for (std::size_t s = 0; s < batch; ++s) {
            std::copy(h.data() + s * w, h.data() + (s + 1) * w, fused.data() + s * fused_width + offset);
        }
        offset += w;
    }
    Tensor y = std::move(fused);
    for (const auto& layer : head_) y = layer->forward(y, mode, nullptr);
    y = std::move(y).reshaped({batch, spec_.horizon, 1});
    y.require_finite("network output");
    return y;
}

Tensor Network::forward(const Tensor& x, const ForwardMode& mode, std::unique_ptr<NetworkCache>& cache) const {
    check_input(x);
    const std::size_t batch = x.dim(0);
    cache = std::make_unique<NetworkCache>();
    cache->batch = batch;
    std::size_t fused_width = 0;
    for (std::size_t w : branch_widths_) fused_width += w;
    Tensor fused({batch, fused_width});
    std::size_t offset = 0;
    cache->branches.resize(branches_.size());
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        Tensor h = x;
        for (const auto& layer : branches_[b]) {
            std::unique_ptr<LayerCache> lc;
            h = layer->forward(h, mode, &lc);
            cache->branches[b].push_back(std::move(lc));
        }
        const std::size_t w = branch_widths_[b];
        for (std::size_t s = 0; s < batch; ++s) {
            std::copy(h.data() + s * w, h.data() + (s + 1) * w, fused.data() + s * fused_width + offset);
        }
        offset += w;
    }
    Tensor y = std::move(fused);
    for (const auto& layer : head_) {
        std::unique_ptr<LayerCache> lc;
        y = layer->forward(y, mode, &lc);
        cache->head.push_back(std::move(lc));
    }
    y = std::move(y).reshaped({batch, spec_.horizon, 1});
    y.require_finite("network output");
    return y;
}

Tensor Network::backward(const Tensor& grad_out, const NetworkCache& cache, std::vector<Tensor>& grads) const {
    const std::size_t batch = cache.batch;
    if (grad_out.size() != batch * spec_.horizon) {
        fail(ErrorKind::kDimension, "output gradient " + shape_to_string(grad_out.shape()) + " does not match batch " +
                                        std::to_string(batch));
    }
    std::vector<std::size_t> first_param;
    std::size_t index = 0;
    for (const auto& branch : branches_) {
        for (const auto& layer : branch) {
            first_param.push_back(index);
            index += layer->params().size();
        }
    }
    const std::size_t head_first = index;

    Tensor g;
    if (head_.empty()) {
        std::size_t fused_width = 0;
        for (std::size_t w : branch_widths_) fused_width += w;
        g = grad_out.reshaped({batch, fused_width});
    } else {
        g = grad_out.reshaped(Shape{batch, head_.back()->output_shape()[0]});
        std::size_t pi = head_first;
        std::vector<std::size_t> head_param(head_.size());
        for (std::size_t i = 0; i < head_.size(); ++i) {
            head_param[i] = pi;
            pi += head_[i]->params().size();
        }
        for (std::size_t i = head_.size(); i-- > 0;) {
            std::vector<Tensor> lg(std::make_move_iterator(grads.begin() + static_cast<std::ptrdiff_t>(head_param[i])),
                                   std::make_move_iterator(grads.begin() + static_cast<std::ptrdiff_t>(
                                                                               head_param[i] + head_[i]->params().size())));
            Shape out{batch};
            out.insert(out.end(), head_[i]->output_shape().begin(), head_[i]->output_shape().end());
            g = head_[i]->backward(std::move(g).reshaped(out), *cache.head[i], lg);
            std::move(lg.begin(), lg.end(), grads.begin() + static_cast<std::ptrdiff_t>(head_param[i]));
        }
    }

    const std::size_t fused_width = g.size() / batch;
    Tensor dx({batch, spec_.input[0], spec_.input[1]});
    std::size_t offset = 0;
    std::size_t layer_index = 0;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        const auto& branch = branches_[b];
        const std::size_t w = branch_widths_[b];
        Shape out{batch};
        out.insert(out.end(), branch.back()->output_shape().begin(), branch.back()->output_shape().end());
        Tensor gb(out);
        for (std::size_t s = 0; s < batch; ++s) {
            const double* src = g.data() + s * fused_width + offset;
            std::copy(src, src + w, gb.data() + s * w);
        }
        offset += w;
        for (std::size_t i = branch.size(); i-- > 0;) {
            const std::size_t first = first_param[layer_index + i];
            const std::size_t count = branch[i]->params().size();
            std::vector<Tensor> lg(std::make_move_iterator(grads.begin() + static_cast<std::ptrdiff_t>(first)),
                                   std::make_move_iterator(grads.begin() + static_cast<std::ptrdiff_t>(first + count)));
            gb = branch[i]->backward(gb, *cache.branches[b][i], lg);
            std::move(lg.begin(), lg.end(), grads.begin() + static_cast<std::ptrdiff_t>(first));
        }
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gb[i];
        layer_index += branch.size();
    }
    return dx;
}

Tensor Network::predict(const Tensor& window) const {
    if (window.rank() != 2) {
        fail(ErrorKind::kDimension, "predict expects a [T, features] window, got " + shape_to_string(window.shape()));
    }
    Shape s{1};
    s.insert(s.end(), window.shape().begin(), window.shape().end());
    return forward(window.reshaped(s)).reshaped({spec_.horizon});
}

Tensor Network::predict_batch(const Tensor& windows, std::size_t chunk) const {
    check_input(windows);
    const std::size_t n = windows.dim(0);
    const std::size_t per = spec_.input[0] * spec_.input[1];
    Tensor out({n, spec_.horizon, 1});
    chunk = std::max<std::size_t>(chunk, 1);
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t m = std::min(chunk, n - start);
        Tensor part({m, spec_.input[0], spec_.input[1]},
                    std::vector<double>(windows.data() + start * per, windows.data() + (start + m) * per));
        const Tensor y = forward(part);
        std::copy(y.data(), y.data() + y.size(), out.data() + start * spec_.horizon);
    }
    return out;
}

Network Network::clone() const {
    Network copy(spec_);
    auto dst = copy.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = *src[i];
    return copy;
}

Network build(const std::string& name, const RandomSource& rng) {
    Network net(model_spec(name));
    net.init(rng);
    return net;
}

Network build_ablation(const std::set<Branch>& excluded, const RandomSource& rng) {
    Network net(mcdfn_spec({}, excluded));
    net.init(rng);
    return net;
}

}  // namespace mcdfn
