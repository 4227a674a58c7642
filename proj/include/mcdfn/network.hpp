#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "mcdfn/layers.hpp"

namespace mcdfn {

/// One input-consuming path of a network: an ordered layer stack whose output
/// is flattened before fusion.
struct BranchSpec {
    std::string name;
    std::vector<LayerConfig> layers;
};

/// Branches share the input, their flattened outputs are concatenated, and the
/// head maps the concatenation to [horizon, 1].
struct NetworkSpec {
    std::string name;
    Shape input{30, 10};
    std::size_t horizon = 30;
    std::vector<BranchSpec> branches;
    std::vector<LayerConfig> head;
};

enum class Branch { kCNN, kBiLSTM, kBiGRU, kStackedLSTM };

const char* to_string(Branch branch);
Branch branch_from_string(const std::string& name);

/// Tunable widths of the fusion network.
struct McdfnOptions {
    std::size_t conv_filters = 352;
    std::size_t conv_kernel = 1;
    std::size_t pool = 3;
    std::size_t cnn_dense = 128;
    std::size_t bilstm_units = 192;
    std::size_t bigru_units = 64;
    std::size_t lstm_units_1 = 64;
    std::size_t lstm_units_2 = 64;
    double bilstm_dropout = 0.2;
    double bigru_dropout = 0.4;
    double stacked_dropout = 0.2;
};

/// Hyperparameters of the single-path benchmark models. Each builder reads
/// only the fields that apply to it.
struct ModelOptions {
    std::size_t units = 0;
    std::size_t units_2 = 0;
    std::size_t filters = 0;
    std::size_t kernel = 1;
    std::size_t dense_units = 0;
    double dropout = 0.0;
    Activation activation = Activation::kRelu;
};

/// Names accepted by build(): the eight benchmark models.
const std::vector<std::string>& model_names();
/// Canonical casing of a model name matched case-insensitively; throws a
/// config error when unknown.
std::string canonical_model_name(const std::string& name);
/// Tuned hyperparameters of a single-path model.
ModelOptions default_options(const std::string& model);

NetworkSpec model_spec(const std::string& name, const ModelOptions& options, Shape input = {30, 10},
                       std::size_t horizon = 30);
NetworkSpec model_spec(const std::string& name);
NetworkSpec mcdfn_spec(const McdfnOptions& options = {}, const std::set<Branch>& excluded = {},
                       Shape input = {30, 10}, std::size_t horizon = 30);

/// The ten ablation rows in table order; each is the set of excluded branches.
const std::vector<std::set<Branch>>& ablation_variants();
std::string ablation_name(const std::set<Branch>& excluded);

/// Per-call record of a cached forward pass.
struct NetworkCache {
    std::vector<std::vector<std::unique_ptr<LayerCache>>> branches;
    std::vector<std::unique_ptr<LayerCache>> head;
    std::size_t batch = 0;
};

/// Instantiated network. Parameters live in the layers; gradients are
/// returned in parameter order.
class Network {
public:
    explicit Network(NetworkSpec spec);
    ~Network();
    Network(Network&&) noexcept;
    Network& operator=(Network&&) noexcept;

    const NetworkSpec& spec() const noexcept { return spec_; }
    const std::string& name() const noexcept { return spec_.name; }
    std::size_t param_count() const;

    /// Seeds every layer from an independent child stream of `rng`.
    void init(const RandomSource& rng);

    /// All parameter tensors in a fixed order, with matching qualified names.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::vector<std::string> parameter_names() const;
    std::vector<Shape> parameter_shapes() const;

    /// x is [B, T, F]; returns [B, horizon, 1].
    Tensor forward(const Tensor& x, const ForwardMode& mode = {}) const;
    Tensor forward(const Tensor& x, const ForwardMode& mode, std::unique_ptr<NetworkCache>& cache) const;
    /// Returns dL/dx and adds parameter gradients into `grads` (parameter order).
    Tensor backward(const Tensor& grad_out, const NetworkCache& cache, std::vector<Tensor>& grads) const;
    /// Zero tensors shaped like the parameters.
    std::vector<Tensor> zero_gradients() const;

    /// Single-window prediction: [T, F] -> [horizon].
    Tensor predict(const Tensor& window) const;
    /// Inference over many windows in chunks; returns [N, horizon, 1].
    Tensor predict_batch(const Tensor& windows, std::size_t chunk = 256) const;

    Network clone() const;

private:
    Tensor check_input(const Tensor& x) const;

    NetworkSpec spec_;
    std::vector<std::vector<std::unique_ptr<Layer>>> branches_;
    std::vector<std::unique_ptr<Layer>> head_;
    std::vector<std::size_t> branch_widths_;
};

/// Builds and initializes a named benchmark model or an ablation identifier
/// ("w/o CNN", "w/o BiLSTM+CNN", ...).
Network build(const std::string& name, const RandomSource& rng);
Network build_ablation(const std::set<Branch>& excluded, const RandomSource& rng);

}  // namespace mcdfn
