#pragma once

#include <memory>

#include "mcdfn/layers.hpp"

namespace mcdfn::detail {

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, RandomSource& rng);
void orthogonal(Tensor& t, RandomSource& rng);

void apply_activation(Activation act, double* v, std::size_t n);
/// Multiplies g by the activation derivative expressed through the output y.
void activation_backward(Activation act, const double* y, double* g, std::size_t n);

void add_bias_rows(double* out, const double* bias, std::size_t rows, std::size_t cols);
void accumulate_column_sums(const double* g, double* out, std::size_t rows, std::size_t cols);

Tensor dropout_mask(const Shape& shape, double rate, RandomSource& rng);

std::unique_ptr<Layer> make_recurrent_layer(const LayerConfig& config, const Shape& input_shape);

}  // namespace mcdfn::detail
