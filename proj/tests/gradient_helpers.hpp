#pragma once

#include <functional>

#include "mcdfn/layers.hpp"

namespace mcdfn::testing {

inline Tensor random_tensor(const Shape& shape, RandomSource& rng, double scale = 1.0) {
    Tensor t(shape);
    for (double& v : t.values()) v = rng.uniform(-scale, scale);
    return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Worst grad_check error of the scalar loss <w, layer(x)> over the input and
/// every parameter tensor, with parameters drawn at random.
inline double layer_gradient_error(Layer& layer, std::size_t batch, std::uint64_t seed) {
    RandomSource rng(seed);
    for (Tensor& p : layer.params()) p = random_tensor(p.shape(), rng, 0.6);
    Shape in{batch};
    in.insert(in.end(), layer.input_shape().begin(), layer.input_shape().end());
    const Tensor x = random_tensor(in, rng);
    Shape out{batch};
    out.insert(out.end(), layer.output_shape().begin(), layer.output_shape().end());
    const Tensor w = random_tensor(out, rng);

    std::unique_ptr<LayerCache> cache;
    layer.forward(x, {}, &cache);
    std::vector<Tensor> grads;
    for (const Tensor& p : layer.params()) grads.emplace_back(p.shape());
    const Tensor dx = layer.backward(w, *cache, grads);

    double worst = grad_check([&](const Tensor& probe) { return dot(w, layer.forward(probe, {}, nullptr)); },
                              dx, x);
    for (std::size_t i = 0; i < layer.params().size(); ++i) {
        Tensor& p = layer.params()[i];
        const Tensor saved = p;
        worst = std::max(worst, grad_check(
                                    [&](const Tensor& probe) {
                                        p = probe;
                                        const double v = dot(w, layer.forward(x, {}, nullptr));
                                        p = saved;
                                        return v;
                                    },
                                    grads[i], saved));
    }
    return worst;
}

}  // namespace mcdfn::testing
