#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcdfn/tensor.hpp"

namespace mcdfn {

enum class LayerKind {
    kDense,
    kConv1D,
    kPool1D,
    kSimpleRNN,
    kLSTM,
    kGRU,
    kBidirectional,
    kDropout,
    kFlatten,
    kReshape,
};

enum class Activation { kLinear, kRelu, kTanh, kSigmoid };
enum class PoolMode { kMax, kAvg };

const char* to_string(LayerKind kind);
const char* to_string(Activation activation);
Activation activation_from_string(const std::string& name);

/// Declarative description of one layer. Fields that do not apply to a kind
/// are ignored.
struct LayerConfig {
    LayerKind kind = LayerKind::kDense;
    /// Dense units, Conv1D filters, or recurrent units.
    std::size_t units = 0;
    std::size_t kernel_size = 1;
    std::size_t pool_size = 2;
    PoolMode pool_mode = PoolMode::kMax;
    Activation activation = Activation::kLinear;
    /// Gate nonlinearity for recurrent layers; only sigmoid is supported.
    Activation recurrent_activation = Activation::kSigmoid;
    double dropout = 0.0;
    bool return_sequences = false;
    /// Wrapped layer for kBidirectional (kLSTM or kGRU); outputs are concatenated.
    LayerKind inner = LayerKind::kLSTM;
    /// GRU: apply the reset gate after the recurrent product and keep separate
    /// input and recurrent biases. false selects the single-bias formulation.
    bool reset_after = true;
    /// Zero-initialize the kernel (output heads).
    bool zero_kernel = false;
    /// Per-sample target shape for kReshape.
    Shape target_shape;

    void validate() const;

    static LayerConfig dense(std::size_t units, Activation act = Activation::kLinear);
    static LayerConfig conv1d(std::size_t filters, std::size_t kernel, Activation act);
    static LayerConfig pool1d(std::size_t pool, PoolMode mode);
    static LayerConfig simple_rnn(std::size_t units, bool sequences);
    static LayerConfig lstm(std::size_t units, bool sequences);
    static LayerConfig gru(std::size_t units, bool sequences);
    static LayerConfig bidirectional(LayerKind inner, std::size_t units);
    static LayerConfig dropout_layer(double rate);
    static LayerConfig flatten();
    static LayerConfig reshape(Shape target);
};

/// Closed-form trainable parameter count of a layer given its per-sample input shape.
std::size_t parameter_count(const LayerConfig& config, const Shape& input_shape);
/// Per-sample output shape; throws a dimension error when the input does not fit.
Shape output_shape(const LayerConfig& config, const Shape& input_shape);

/// Opaque per-call record kept by forward for the matching backward.
struct LayerCache {
    virtual ~LayerCache() = default;
};

struct ForwardMode {
    bool training = false;
    /// Source for dropout masks; required only when training with dropout > 0.
    RandomSource* rng = nullptr;
};

/// A parameterized transform over a batch. Inputs and outputs carry a leading
/// batch axis followed by the per-sample shape. Layers keep no state between
/// calls: forward writes whatever backward needs into the optional cache.
class Layer {
public:
    Layer(LayerConfig config, Shape input_shape);
    virtual ~Layer() = default;

    Layer(const Layer&) = delete;
    Layer& operator=(const Layer&) = delete;

    const LayerConfig& config() const noexcept { return config_; }
    const Shape& input_shape() const noexcept { return input_shape_; }
    const Shape& output_shape() const noexcept { return output_shape_; }

    std::vector<Tensor>& params() noexcept { return params_; }
    const std::vector<Tensor>& params() const noexcept { return params_; }
    const std::vector<std::string>& param_names() const noexcept { return param_names_; }
    std::size_t param_count() const;

    /// Glorot-uniform kernels, orthogonal recurrent kernels, zero biases
    /// (LSTM forget-gate bias 1), zero kernels where `zero_kernel` is set.
    virtual void init(RandomSource& rng);

    virtual Tensor forward(const Tensor& x, const ForwardMode& mode,
                           std::unique_ptr<LayerCache>* cache) const = 0;
    /// Returns dL/dx and adds dL/dθ into `param_grads` (same layout as params()).
    virtual Tensor backward(const Tensor& grad_out, const LayerCache& cache,
                            std::vector<Tensor>& param_grads) const = 0;

protected:
    void add_param(std::string name, Shape shape);
    /// Checks that x is [B, input_shape...] and returns B.
    std::size_t batch_of(const Tensor& x) const;

    LayerConfig config_;
    Shape input_shape_;
    Shape output_shape_;
    std::vector<Tensor> params_;
    std::vector<std::string> param_names_;
};

std::unique_ptr<Layer> make_layer(const LayerConfig& config, const Shape& input_shape);

/// Initial states for a recurrent pass, each [B,u]; empty tensors mean zeros.
struct RecurrentState {
    Tensor h;
    Tensor c;
};

/// Hidden sequence [B,T,u] and, for LSTM, the final cell state [B,u].
struct RecurrentOutput {
    Tensor hidden;
    Tensor cell;
};

/// Base of SimpleRNN, LSTM and GRU. forward() starts from zero state and
/// returns the full sequence or the last step per `return_sequences`.
class RecurrentLayer : public Layer {
public:
    using Layer::Layer;
    std::size_t units() const noexcept { return config_.units; }
    virtual RecurrentOutput run(const Tensor& x, const RecurrentState& initial,
                                std::unique_ptr<LayerCache>* cache) const = 0;
};

// Single-sample conveniences over [T, in] inputs; parameters are taken from
// a constructed layer so shapes stay consistent.
Tensor dense_forward(const Tensor& x, const Layer& dense);
Tensor conv1d_forward(const Tensor& x, const Layer& conv);
Tensor pool1d_forward(const Tensor& x, std::size_t pool, PoolMode mode);
RecurrentOutput recurrent_forward(const Tensor& x, const Layer& rnn,
                                  const RecurrentState& initial = {});
Tensor dropout_forward(const Tensor& x, double rate, bool training, RandomSource& rng);

}  // namespace mcdfn
