#include "mcdfn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "layers_internal.hpp"

namespace mcdfn {

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::kDense: return "Dense";
        case LayerKind::kConv1D: return "Conv1D";
        case LayerKind::kPool1D: return "Pool1D";
        case LayerKind::kSimpleRNN: return "SimpleRNN";
        case LayerKind::kLSTM: return "LSTM";
        case LayerKind::kGRU: return "GRU";
        case LayerKind::kBidirectional: return "Bidirectional";
        case LayerKind::kDropout: return "Dropout";
        case LayerKind::kFlatten: return "Flatten";
        case LayerKind::kReshape: return "Reshape";
    }
    return "?";
}

const char* to_string(Activation activation) {
    switch (activation) {
        case Activation::kLinear: return "linear";
        case Activation::kRelu: return "relu";
        case Activation::kTanh: return "tanh";
        case Activation::kSigmoid: return "sigmoid";
    }
    return "?";
}

Activation activation_from_string(const std::string& name) {
    if (name == "linear") return Activation::kLinear;
    if (name == "relu") return Activation::kRelu;
    if (name == "tanh") return Activation::kTanh;
    if (name == "sigmoid") return Activation::kSigmoid;
    fail(ErrorKind::kConfig, "unknown activation '" + name + "'");
}

void LayerConfig::validate() const {
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        fail(ErrorKind::kConfig, "dropout rate must lie in [0, 1), got " + std::to_string(dropout));
    }
    switch (kind) {
        case LayerKind::kDense:
        case LayerKind::kSimpleRNN:
        case LayerKind::kLSTM:
        case LayerKind::kGRU:
            if (units < 1) fail(ErrorKind::kConfig, std::string(to_string(kind)) + " needs units >= 1");
            break;
        case LayerKind::kConv1D:
            if (units < 1) fail(ErrorKind::kConfig, "Conv1D needs filters >= 1");
            if (kernel_size < 1) fail(ErrorKind::kConfig, "Conv1D needs kernel size >= 1");
            break;
        case LayerKind::kPool1D:
            if (pool_size < 1) fail(ErrorKind::kConfig, "pool size must be >= 1");
            break;
        case LayerKind::kBidirectional:
            if (units < 1) fail(ErrorKind::kConfig, "Bidirectional needs units >= 1");
            if (inner != LayerKind::kLSTM && inner != LayerKind::kGRU) {
                fail(ErrorKind::kConfig, "Bidirectional wraps LSTM or GRU only");
            }
            break;
        case LayerKind::kReshape:
            if (target_shape.empty()) fail(ErrorKind::kConfig, "Reshape needs a target shape");
            break;
        default: break;
    }
    const bool recurrent = kind == LayerKind::kSimpleRNN || kind == LayerKind::kLSTM ||
                           kind == LayerKind::kGRU || kind == LayerKind::kBidirectional;
    if (recurrent && recurrent_activation != Activation::kSigmoid) {
        fail(ErrorKind::kConfig, "recurrent activation must be sigmoid");
    }
}

LayerConfig LayerConfig::dense(std::size_t units, Activation act) {
    LayerConfig c;
    c.kind = LayerKind::kDense;
    c.units = units;
    c.activation = act;
    return c;
}

LayerConfig LayerConfig::conv1d(std::size_t filters, std::size_t kernel, Activation act) {
    LayerConfig c;
    c.kind = LayerKind::kConv1D;
    c.units = filters;
    c.kernel_size = kernel;
    c.activation = act;
    return c;
}

LayerConfig LayerConfig::pool1d(std::size_t pool, PoolMode mode) {
    LayerConfig c;
    c.kind = LayerKind::kPool1D;
    c.pool_size = pool;
    c.pool_mode = mode;
    return c;
}

LayerConfig LayerConfig::simple_rnn(std::size_t units, bool sequences) {
    LayerConfig c;
    c.kind = LayerKind::kSimpleRNN;
    c.units = units;
    c.activation = Activation::kTanh;
    c.return_sequences = sequences;
    return c;
}

LayerConfig LayerConfig::lstm(std::size_t units, bool sequences) {
    LayerConfig c = simple_rnn(units, sequences);
    c.kind = LayerKind::kLSTM;
    return c;
}

LayerConfig LayerConfig::gru(std::size_t units, bool sequences) {
    LayerConfig c = simple_rnn(units, sequences);
    c.kind = LayerKind::kGRU;
    return c;
}

LayerConfig LayerConfig::bidirectional(LayerKind inner, std::size_t units) {
    LayerConfig c = simple_rnn(units, true);
    c.kind = LayerKind::kBidirectional;
    c.inner = inner;
    return c;
}

LayerConfig LayerConfig::dropout_layer(double rate) {
    LayerConfig c;
    c.kind = LayerKind::kDropout;
    c.dropout = rate;
    return c;
}

LayerConfig LayerConfig::flatten() {
    LayerConfig c;
    c.kind = LayerKind::kFlatten;
    return c;
}

LayerConfig LayerConfig::reshape(Shape target) {
    LayerConfig c;
    c.kind = LayerKind::kReshape;
    c.target_shape = std::move(target);
    return c;
}

namespace {

std::size_t recurrent_count(LayerKind kind, std::size_t in, std::size_t u, bool reset_after) {
    switch (kind) {
        case LayerKind::kSimpleRNN: return u * (in + u) + u;
        case LayerKind::kLSTM: return 4 * (u * (in + u) + u);
        case LayerKind::kGRU: return 3 * (u * (in + u) + (reset_after ? 2 * u : u));
        default: return 0;
    }
}

void require_sequence_input(const LayerConfig& c, const Shape& in) {
    if (in.size() != 2) {
        fail(ErrorKind::kDimension, std::string(to_string(c.kind)) + " expects [T, features], got " +
                                        shape_to_string(in));
    }
}

}  // namespace

Shape output_shape(const LayerConfig& c, const Shape& in) {
    c.validate();
    if (in.empty()) fail(ErrorKind::kDimension, "empty input shape");
    switch (c.kind) {
        case LayerKind::kDense: {
            Shape out = in;
            out.back() = c.units;
            return out;
        }
        case LayerKind::kConv1D:
            require_sequence_input(c, in);
            if (in[0] < c.kernel_size) {
                fail(ErrorKind::kDimension, "Conv1D kernel " + std::to_string(c.kernel_size) +
                                                " longer than sequence " + std::to_string(in[0]));
            }
            return {in[0] - c.kernel_size + 1, c.units};
        case LayerKind::kPool1D:
            require_sequence_input(c, in);
            if (in[0] < c.pool_size) {
                fail(ErrorKind::kDimension, "pool size " + std::to_string(c.pool_size) +
                                                " exceeds sequence length " + std::to_string(in[0]));
            }
            return {in[0] / c.pool_size, in[1]};
        case LayerKind::kSimpleRNN:
        case LayerKind::kLSTM:
        case LayerKind::kGRU:
            require_sequence_input(c, in);
            if (c.return_sequences) return {in[0], c.units};
            return {c.units};
        case LayerKind::kBidirectional:
            require_sequence_input(c, in);
            return {in[0], 2 * c.units};
        case LayerKind::kDropout: return in;
        case LayerKind::kFlatten: return {shape_size(in)};
        case LayerKind::kReshape:
            if (shape_size(c.target_shape) != shape_size(in)) {
                fail(ErrorKind::kDimension, "cannot reshape " + shape_to_string(in) + " to " +
                                                shape_to_string(c.target_shape));
            }
            return c.target_shape;
    }
    fail(ErrorKind::kConfig, "unknown layer kind");
}

std::size_t parameter_count(const LayerConfig& c, const Shape& in) {
    output_shape(c, in);
    const std::size_t features = in.back();
    switch (c.kind) {
        case LayerKind::kDense: return features * c.units + c.units;
        case LayerKind::kConv1D: return c.kernel_size * features * c.units + c.units;
        case LayerKind::kSimpleRNN:
        case LayerKind::kLSTM:
        case LayerKind::kGRU: return recurrent_count(c.kind, features, c.units, c.reset_after);
        case LayerKind::kBidirectional:
            return 2 * recurrent_count(c.inner, features, c.units, c.reset_after);
        default: return 0;
    }
}

Layer::Layer(LayerConfig config, Shape input_shape)
    : config_(std::move(config)), input_shape_(std::move(input_shape)) {
    output_shape_ = mcdfn::output_shape(config_, input_shape_);
}

std::size_t Layer::param_count() const {
    std::size_t n = 0;
    for (const Tensor& p : params_) n += p.size();
    return n;
}

void Layer::init(RandomSource&) {}

void Layer::add_param(std::string name, Shape shape) {
    params_.emplace_back(std::move(shape));
    param_names_.push_back(std::move(name));
}

std::size_t Layer::batch_of(const Tensor& x) const {
    const Shape& s = x.shape();
    bool ok = s.size() == input_shape_.size() + 1;
    for (std::size_t i = 0; ok && i < input_shape_.size(); ++i) ok = s[i + 1] == input_shape_[i];
    if (!ok) {
        fail(ErrorKind::kDimension, std::string(to_string(config_.kind)) + " expects [B]+" +
                                        shape_to_string(input_shape_) + ", got " +
                                        shape_to_string(s));
    }
    return s[0];
}

namespace detail {

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, RandomSource& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.values()) v = rng.uniform(-limit, limit);
}

void orthogonal(Tensor& t, RandomSource& rng) {
    // t is [rows, cols]; produce orthonormal rows when rows <= cols (else columns)
    // by modified Gram-Schmidt on a Gaussian matrix.
    const std::size_t rows = t.dim(0);
    const std::size_t cols = t.dim(1);
    const bool wide = rows <= cols;
    const std::size_t nvec = wide ? rows : cols;
    const std::size_t len = wide ? cols : rows;
    std::vector<double> q(nvec * len);
    for (double& v : q) v = rng.normal();
    for (std::size_t i = 0; i < nvec; ++i) {
        double* qi = q.data() + i * len;
        for (std::size_t j = 0; j < i; ++j) {
            const double* qj = q.data() + j * len;
            double dot = 0.0;
            for (std::size_t p = 0; p < len; ++p) dot += qi[p] * qj[p];
            for (std::size_t p = 0; p < len; ++p) qi[p] -= dot * qj[p];
        }
        double norm = 0.0;
        for (std::size_t p = 0; p < len; ++p) norm += qi[p] * qi[p];
        norm = std::sqrt(norm);
        for (std::size_t p = 0; p < len; ++p) qi[p] /= norm;
    }
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            t.at(r, c) = wide ? q[r * len + c] : q[c * len + r];
        }
    }
}

void apply_activation(Activation act, double* v, std::size_t n) {
    switch (act) {
        case Activation::kLinear: return;
        case Activation::kRelu:
            for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
            return;
        case Activation::kTanh:
            for (std::size_t i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
            return;
        case Activation::kSigmoid:
            for (std::size_t i = 0; i < n; ++i) v[i] = sigmoid(v[i]);
            return;
    }
}

void activation_backward(Activation act, const double* y, double* g, std::size_t n) {
    switch (act) {
        case Activation::kLinear: return;
        case Activation::kRelu:
            for (std::size_t i = 0; i < n; ++i) {
                if (!(y[i] > 0.0)) g[i] = 0.0;
            }
            return;
        case Activation::kTanh:
            for (std::size_t i = 0; i < n; ++i) g[i] *= 1.0 - y[i] * y[i];
            return;
        case Activation::kSigmoid:
            for (std::size_t i = 0; i < n; ++i) g[i] *= y[i] * (1.0 - y[i]);
            return;
    }
}

void add_bias_rows(double* out, const double* bias, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* o = out + r * cols;
        for (std::size_t c = 0; c < cols; ++c) o[c] += bias[c];
    }
}

void accumulate_column_sums(const double* g, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += gr[c];
    }
}

}  // namespace detail

namespace {

using detail::activation_backward;
using detail::apply_activation;

struct OutputCache : LayerCache {
    Tensor input;
    Tensor output;
};

// Dense over the last axis; all leading axes (batch, time) are independent rows.
class DenseLayer final : public Layer {
public:
    DenseLayer(LayerConfig c, Shape in) : Layer(std::move(c), std::move(in)) {
        add_param("kernel", {input_shape_.back(), config_.units});
        add_param("bias", {config_.units});
    }

    void init(RandomSource& rng) override {
        if (config_.zero_kernel) {
            params_[0].fill(0.0);
        } else {
            detail::glorot_uniform(params_[0], input_shape_.back(), config_.units, rng);
        }
        params_[1].fill(0.0);
    }

    Tensor forward(const Tensor& x, const ForwardMode&, std::unique_ptr<LayerCache>* cache) const override {
        const std::size_t batch = batch_of(x);
        const std::size_t in = input_shape_.back();
        const std::size_t out = config_.units;
        const std::size_t rows = x.size() / in;
        Shape shape{batch};
        shape.insert(shape.end(), output_shape_.begin(), output_shape_.end());
        Tensor y(shape);
        gemm(x.data(), params_[0].data(), y.data(), rows, in, out);
        detail::add_bias_rows(y.data(), params_[1].data(), rows, out);
        apply_activation(config_.activation, y.data(), y.size());
        if (cache) {
            auto c = std::make_unique<OutputCache>();
            c->input = x;
            c->output = y;
            *cache = std::move(c);
        }
        return y;
    }

    Tensor backward(const Tensor& grad_out, const LayerCache& cache_base,
                    std::vector<Tensor>& grads) const override {
        const auto& cache = static_cast<const OutputCache&>(cache_base);
        const std::size_t in = input_shape_.back();
        const std::size_t out = config_.units;
        const std::size_t rows = cache.input.size() / in;
        Tensor g = grad_out;
        activation_backward(config_.activation, cache.output.data(), g.data(), g.size());
        gemm_tn(cache.input.data(), g.data(), grads[0].data(), in, rows, out, true);
        detail::accumulate_column_sums(g.data(), grads[1].data(), rows, out);
        Tensor dx(cache.input.shape());
        gemm_nt(g.data(), params_[0].data(), dx.data(), rows, out, in);
        return dx;
    }
};

// Valid 1-D convolution via im2col: row (b, t) holds x[b, t..t+k) flattened,
// which matches the [k, in, filters] kernel layout read as [k*in, filters].
class Conv1DLayer final : public Layer {
public:
    Conv1DLayer(LayerConfig c, Shape in) : Layer(std::move(c), std::move(in)) {
        add_param("kernel", {config_.kernel_size, input_shape_[1], config_.units});
        add_param("bias", {config_.units});
    }

    void init(RandomSource& rng) override {
        const std::size_t k = config_.kernel_size;
        if (config_.zero_kernel) {
            params_[0].fill(0.0);
        } else {
            detail::glorot_uniform(params_[0], k * input_shape_[1], k * config_.units, rng);
        }
        params_[1].fill(0.0);
    }

    Tensor forward(const Tensor& x, const ForwardMode&, std::unique_ptr<LayerCache>* cache) const override {
        const std::size_t batch = batch_of(x);
        const std::size_t steps = input_shape_[0];
        const std::size_t in = input_shape_[1];
        const std::size_t k = config_.kernel_size;
        const std::size_t out_steps = output_shape_[0];
        const std::size_t filters = config_.units;
        const std::size_t width = k * in;
        Tensor cols = im2col(x, batch, steps, in, k, out_steps);
        Tensor y({batch, out_steps, filters});
        gemm(cols.data(), params_[0].data(), y.data(), batch * out_steps, width, filters);
        detail::add_bias_rows(y.data(), params_[1].data(), batch * out_steps, filters);
        apply_activation(config_.activation, y.data(), y.size());
        if (cache) {
            auto c = std::make_unique<OutputCache>();
            c->input = std::move(cols);
            c->output = y;
            *cache = std::move(c);
        }
        return y;
    }

    Tensor backward(const Tensor& grad_out, const LayerCache& cache_base,
                    std::vector<Tensor>& grads) const override {
        const auto& cache = static_cast<const OutputCache&>(cache_base);
        const std::size_t batch = grad_out.dim(0);
        const std::size_t steps = input_shape_[0];
        const std::size_t in = input_shape_[1];
        const std::size_t k = config_.kernel_size;
        const std::size_t out_steps = output_shape_[0];
        const std::size_t filters = config_.units;
        const std::size_t width = k * in;
        const std::size_t rows = batch * out_steps;
        Tensor g = grad_out;
        activation_backward(config_.activation, cache.output.data(), g.data(), g.size());
        gemm_tn(cache.input.data(), g.data(), grads[0].data(), width, rows, filters, true);
        detail::accumulate_column_sums(g.data(), grads[1].data(), rows, filters);
        Tensor dcols({rows, width});
        gemm_nt(g.data(), params_[0].data(), dcols.data(), rows, filters, width);
        Tensor dx({batch, steps, in});
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < out_steps; ++t) {
                const double* src = dcols.data() + (b * out_steps + t) * width;
                double* dst = dx.data() + (b * steps + t) * in;
                for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
            }
        }
        return dx;
    }

private:
    static Tensor im2col(const Tensor& x, std::size_t batch, std::size_t steps, std::size_t in,
                         std::size_t k, std::size_t out_steps) {
        const std::size_t width = k * in;
        Tensor cols({batch * out_steps, width});
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < out_steps; ++t) {
                const double* src = x.data() + (b * steps + t) * in;
                std::copy(src, src + width, cols.data() + (b * out_steps + t) * width);
            }
        }
        return cols;
    }
};

struct PoolCache : LayerCache {
    std::vector<std::size_t> argmax;
    std::size_t batch = 0;
};

// Non-overlapping windows with stride = pool; trailing steps are dropped.
class Pool1DLayer final : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& x, const ForwardMode&, std::unique_ptr<LayerCache>* cache) const override {
        const std::size_t batch = batch_of(x);
        const std::size_t steps = input_shape_[0];
        const std::size_t ch = input_shape_[1];
        const std::size_t pool = config_.pool_size;
        const std::size_t out_steps = output_shape_[0];
        Tensor y({batch, out_steps, ch});
        std::vector<std::size_t> argmax;
        const bool is_max = config_.pool_mode == PoolMode::kMax;
        if (is_max && cache) argmax.resize(y.size());
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < out_steps; ++t) {
                for (std::size_t c = 0; c < ch; ++c) {
                    const std::size_t base = (b * steps + t * pool) * ch + c;
                    double acc = x[base];
                    std::size_t best = base;
                    for (std::size_t m = 1; m < pool; ++m) {
                        const double v = x[base + m * ch];
                        if (is_max) {
                            if (v > acc) {
                                acc = v;
                                best = base + m * ch;
                            }
                        } else {
                            acc += v;
                        }
                    }
                    const std::size_t o = (b * out_steps + t) * ch + c;
                    y[o] = is_max ? acc : acc / static_cast<double>(pool);
                    if (is_max && cache) argmax[o] = best;
                }
            }
        }
        if (cache) {
            auto pc = std::make_unique<PoolCache>();
            pc->argmax = std::move(argmax);
            pc->batch = batch;
            *cache = std::move(pc);
        }
        return y;
    }

    Tensor backward(const Tensor& grad_out, const LayerCache& cache_base,
                    std::vector<Tensor>&) const override {
        const auto& cache = static_cast<const PoolCache&>(cache_base);
        const std::size_t steps = input_shape_[0];
        const std::size_t ch = input_shape_[1];
        const std::size_t pool = config_.pool_size;
        const std::size_t out_steps = output_shape_[0];
        Tensor dx({cache.batch, steps, ch});
        if (config_.pool_mode == PoolMode::kMax) {
            for (std::size_t o = 0; o < grad_out.size(); ++o) dx[cache.argmax[o]] += grad_out[o];
            return dx;
        }
        const double scale = 1.0 / static_cast<double>(pool);
        for (std::size_t b = 0; b < cache.batch; ++b) {
            for (std::size_t t = 0; t < out_steps; ++t) {
                for (std::size_t c = 0; c < ch; ++c) {
                    const double g = grad_out[(b * out_steps + t) * ch + c] * scale;
                    const std::size_t base = (b * steps + t * pool) * ch + c;
                    for (std::size_t m = 0; m < pool; ++m) dx[base + m * ch] += g;
                }
            }
        }
        return dx;
    }
};

struct MaskCache : LayerCache {
    Tensor mask;
};

// Inverted dropout: survivors are scaled by 1/(1-rate) during training.
class DropoutLayer final : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& x, const ForwardMode& mode, std::unique_ptr<LayerCache>* cache) const override {
        batch_of(x);
        if (!mode.training || config_.dropout == 0.0) {
            if (cache) *cache = std::make_unique<MaskCache>();
            return x;
        }
        if (!mode.rng) fail(ErrorKind::kConfig, "training-mode dropout needs a random source");
        Tensor mask = detail::dropout_mask(x.shape(), config_.dropout, *mode.rng);
        Tensor y = x;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
        if (cache) {
            auto c = std::make_unique<MaskCache>();
            c->mask = std::move(mask);
            *cache = std::move(c);
        }
        return y;
    }

    Tensor backward(const Tensor& grad_out, const LayerCache& cache_base,
                    std::vector<Tensor>&) const override {
        const auto& cache = static_cast<const MaskCache&>(cache_base);
        if (cache.mask.empty()) return grad_out;
        Tensor dx = grad_out;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= cache.mask[i];
        return dx;
    }
};

// Flatten and Reshape only relabel the per-sample shape.
class ReshapeLayer final : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& x, const ForwardMode&, std::unique_ptr<LayerCache>* cache) const override {
        const std::size_t batch = batch_of(x);
        if (cache) *cache = std::make_unique<LayerCache>();
        Shape s{batch};
        s.insert(s.end(), output_shape_.begin(), output_shape_.end());
        return x.reshaped(std::move(s));
    }

    Tensor backward(const Tensor& grad_out, const LayerCache&, std::vector<Tensor>&) const override {
        Shape s{grad_out.dim(0)};
        s.insert(s.end(), input_shape_.begin(), input_shape_.end());
        return grad_out.reshaped(std::move(s));
    }
};

}  // namespace

namespace detail {

Tensor dropout_mask(const Shape& shape, double rate, RandomSource& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        fail(ErrorKind::kConfig, "dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    Tensor mask(shape);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& m : mask.values()) m = rng.uniform() < rate ? 0.0 : keep_scale;
    return mask;
}

}  // namespace detail

std::unique_ptr<Layer> make_layer(const LayerConfig& config, const Shape& input_shape) {
    config.validate();
    switch (config.kind) {
        case LayerKind::kDense: return std::make_unique<DenseLayer>(config, input_shape);
        case LayerKind::kConv1D: return std::make_unique<Conv1DLayer>(config, input_shape);
        case LayerKind::kPool1D: return std::make_unique<Pool1DLayer>(config, input_shape);
        case LayerKind::kDropout: return std::make_unique<DropoutLayer>(config, input_shape);
        case LayerKind::kFlatten:
        case LayerKind::kReshape: return std::make_unique<ReshapeLayer>(config, input_shape);
        case LayerKind::kSimpleRNN:
        case LayerKind::kLSTM:
        case LayerKind::kGRU:
        case LayerKind::kBidirectional: return detail::make_recurrent_layer(config, input_shape);
    }
    fail(ErrorKind::kConfig, "unknown layer kind");
}

namespace {

Tensor as_batch(const Tensor& x) {
    Shape s{1};
    s.insert(s.end(), x.shape().begin(), x.shape().end());
    return x.reshaped(std::move(s));
}

Tensor drop_batch(const Tensor& y) {
    Shape s(y.shape().begin() + 1, y.shape().end());
    return y.reshaped(std::move(s));
}

}  // namespace

Tensor dense_forward(const Tensor& x, const Layer& dense) {
    if (dense.config().kind != LayerKind::kDense) fail(ErrorKind::kConfig, "dense_forward needs a Dense layer");
    if (x.shape() != dense.input_shape()) {
        fail(ErrorKind::kDimension, "Dense expects " + shape_to_string(dense.input_shape()) + ", got " +
                                        shape_to_string(x.shape()));
    }
    return drop_batch(dense.forward(as_batch(x), {}, nullptr));
}

Tensor conv1d_forward(const Tensor& x, const Layer& conv) {
    if (conv.config().kind != LayerKind::kConv1D) fail(ErrorKind::kConfig, "conv1d_forward needs a Conv1D layer");
    if (x.rank() != 2 || x.dim(0) < conv.config().kernel_size || x.shape() != conv.input_shape()) {
        fail(ErrorKind::kDimension, "Conv1D expects " + shape_to_string(conv.input_shape()) + ", got " +
                                        shape_to_string(x.shape()));
    }
    return drop_batch(conv.forward(as_batch(x), {}, nullptr));
}

Tensor pool1d_forward(const Tensor& x, std::size_t pool, PoolMode mode) {
    if (x.rank() != 2) fail(ErrorKind::kDimension, "pool1d expects [T, channels], got " + shape_to_string(x.shape()));
    auto layer = make_layer(LayerConfig::pool1d(pool, mode), x.shape());
    return drop_batch(layer->forward(as_batch(x), {}, nullptr));
}

RecurrentOutput recurrent_forward(const Tensor& x, const Layer& rnn, const RecurrentState& initial) {
    const auto* rec = dynamic_cast<const RecurrentLayer*>(&rnn);
    if (!rec) fail(ErrorKind::kConfig, "recurrent_forward needs a SimpleRNN, LSTM or GRU layer");
    auto batched = [](const Tensor& s) { return s.empty() ? s : as_batch(s); };
    RecurrentOutput out = rec->run(as_batch(x), {batched(initial.h), batched(initial.c)}, nullptr);
    out.hidden = drop_batch(out.hidden);
    if (!out.cell.empty()) out.cell = drop_batch(out.cell);
    return out;
}

Tensor dropout_forward(const Tensor& x, double rate, bool training, RandomSource& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        fail(ErrorKind::kConfig, "dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (!training || rate == 0.0) return x;
    Tensor mask = detail::dropout_mask(x.shape(), rate, rng);
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
    return y;
}

}  // namespace mcdfn
