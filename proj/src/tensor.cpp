#include "mcdfn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace mcdfn {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

namespace {

void check_shape(const Shape& shape) {
    if (shape.empty()) fail(ErrorKind::kDimension, "tensor shape must have at least one axis");
    for (std::size_t d : shape) {
        if (d == 0) fail(ErrorKind::kDimension, "zero extent in shape " + shape_to_string(shape));
    }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    check_shape(shape_);
    if (data_.size() != shape_size(shape_)) {
        fail(ErrorKind::kDimension, "shape " + shape_to_string(shape_) + " needs " +
                                        std::to_string(shape_size(shape_)) + " values, got " +
                                        std::to_string(data_.size()));
    }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0) fail(ErrorKind::kDimension, "matrix literal needs at least one row");
    const std::size_t cols = rows.begin()->size();
    std::vector<double> flat;
    flat.reserve(rows.size() * cols);
    for (const auto& row : rows) {
        if (row.size() != cols) fail(ErrorKind::kDimension, "ragged matrix literal");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return Tensor({rows.size(), cols}, std::move(flat));
}

Tensor Tensor::reshaped(Shape shape) const& {
    Tensor copy = *this;
    return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
    check_shape(shape);
    if (shape_size(shape) != data_.size()) {
        fail(ErrorKind::kDimension, "cannot reshape " + shape_to_string(shape_) + " to " +
                                        shape_to_string(shape));
    }
    shape_ = std::move(shape);
    return std::move(*this);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(std::string_view what) const {
    if (!all_finite()) fail(ErrorKind::kNumeric, "non-finite value in " + std::string(what));
}

namespace {

std::vector<double> transposed_copy(const double* src, std::size_t rows, std::size_t cols) {
    std::vector<double> out(rows * cols);
    constexpr std::size_t kTile = 32;
    for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
        for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
            const std::size_t r1 = std::min(rows, r0 + kTile);
            const std::size_t c1 = std::min(cols, c0 + kTile);
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t q = c0; q < c1; ++q) out[q * rows + r] = src[r * cols + q];
            }
        }
    }
    return out;
}

}  // namespace

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    const std::vector<double> at = transposed_copy(a, k, m);
    gemm(at.data(), b, c, m, k, n, accumulate);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
    const std::vector<double> bt = transposed_copy(b, n, k);
    gemm(a, bt.data(), c, m, k, n, accumulate);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        fail(ErrorKind::kDimension, "matmul of " + shape_to_string(a.shape()) + " and " +
                                        shape_to_string(b.shape()));
    }
    Tensor out({a.dim(0), b.dim(1)});
    gemm(a.data(), b.data(), out.data(), a.dim(0), a.dim(1), b.dim(1));
    out.require_finite("matmul");
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) fail(ErrorKind::kDimension, "transpose needs rank 2, got " + shape_to_string(a.shape()));
    return Tensor({a.dim(1), a.dim(0)}, transposed_copy(a.data(), a.dim(0), a.dim(1)));
}

double sigmoid(double x) noexcept {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor elementwise(ElementOp op, const Tensor& a, const std::optional<Tensor>& b) {
    const bool binary = op == ElementOp::kAdd || op == ElementOp::kSub || op == ElementOp::kMul;
    Tensor out = a;
    auto values = out.values();
    if (!binary) {
        if (b) fail(ErrorKind::kConfig, "unary elementwise op given a second operand");
        for (double& v : values) {
            switch (op) {
                case ElementOp::kSigmoid: v = sigmoid(v); break;
                case ElementOp::kTanh: v = std::tanh(v); break;
                case ElementOp::kRelu: v = v > 0.0 ? v : 0.0; break;
                default: break;
            }
        }
    } else {
        if (!b) fail(ErrorKind::kConfig, "binary elementwise op needs a second operand");
        std::size_t period = 0;
        if (b->shape() == a.shape()) {
            period = a.size();
        } else if (b->rank() == 1 && b->dim(0) == a.shape().back()) {
            period = b->size();
        } else {
            fail(ErrorKind::kDimension, "cannot broadcast " + shape_to_string(b->shape()) +
                                            " onto " + shape_to_string(a.shape()));
        }
        const double* bv = b->data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double rhs = bv[i % period];
            switch (op) {
                case ElementOp::kAdd: values[i] += rhs; break;
                case ElementOp::kSub: values[i] -= rhs; break;
                case ElementOp::kMul: values[i] *= rhs; break;
                default: break;
            }
        }
    }
    out.require_finite("elementwise");
    return out;
}

Tensor flatten(const Tensor& x) { return x.reshaped({x.size()}); }

Tensor concat(std::span<const Tensor> parts) {
    if (parts.empty()) fail(ErrorKind::kDimension, "concat of zero tensors");
    std::vector<double> flat;
    for (const Tensor& p : parts) {
        if (p.rank() != 1) {
            fail(ErrorKind::kDimension, "concat expects rank-1 inputs, got " + shape_to_string(p.shape()));
        }
        flat.insert(flat.end(), p.values().begin(), p.values().end());
    }
    const std::size_t n = flat.size();
    return Tensor({n}, std::move(flat));
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : label) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = seed ^ (h + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

RandomSource RandomSource::child(std::string_view label) const {
    return RandomSource(derive_seed(seed_, label));
}

std::uint64_t RandomSource::next_u64() { return engine_(); }

double RandomSource::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RandomSource::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t RandomSource::below(std::uint64_t n) {
    if (n == 0) fail(ErrorKind::kConfig, "RandomSource::below(0)");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return r % n;
}

double RandomSource::normal() {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& analytic_grad,
                  const Tensor& x, double eps) {
    if (analytic_grad.shape() != x.shape()) {
        fail(ErrorKind::kDimension, "gradient shape " + shape_to_string(analytic_grad.shape()) +
                                        " does not match input " + shape_to_string(x.shape()));
    }
    Tensor probe = x;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double up = f(probe);
        probe[i] = saved - eps;
        const double down = f(probe);
        probe[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            fail(ErrorKind::kNumeric, "grad_check: f is not finite near coordinate " + std::to_string(i));
        }
        const double central = (up - down) / (2.0 * eps);
        const double g = analytic_grad[i];
        const double denom = std::max({1.0, std::abs(g), std::abs(central)});
        worst = std::max(worst, std::abs(g - central) / denom);
    }
    return worst;
}

}  // namespace mcdfn
