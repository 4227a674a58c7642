#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcdfn/errors.hpp"

namespace mcdfn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles. Every extent is positive and the flat
/// buffer always holds exactly product(shape) values.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    /// Rank-1 tensor from a literal list.
    static Tensor vector(std::initializer_list<double> values);
    /// Rank-2 tensor from nested literal rows; all rows must have equal length.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    /// Same values under a new shape with the same element count.
    Tensor reshaped(Shape shape) const&;
    Tensor reshaped(Shape shape) &&;

    void fill(double value);
    bool all_finite() const noexcept;
    /// Throws a numeric error naming `what` when any value is NaN or infinite.
    void require_finite(std::string_view what) const;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// C = A·B for row-major A [m,k] and B [k,n]. Every output element is summed
/// strictly left to right over k, so results do not depend on blocking.
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate = false);
/// C = Aᵀ·B for A stored [k,m] and B [k,n].
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);
/// C = A·Bᵀ for A [m,k] and B stored [n,k].
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);

/// Right-hand GEMM operand pre-arranged into the kernel's panel layout, for
/// matrices reused across many products (recurrent kernels).
class PackedMatrix {
public:
    PackedMatrix() = default;
    /// Packs row-major B [k,n].
    PackedMatrix(const double* b, std::size_t k, std::size_t n);
    /// Packs Bᵀ for B stored [n,k].
    static PackedMatrix transposed(const double* b, std::size_t n, std::size_t k);

    std::size_t rows() const noexcept { return k_; }
    std::size_t cols() const noexcept { return n_; }
    std::size_t padded_cols() const noexcept { return npad_; }
    const double* data() const noexcept { return data_.data(); }

private:
    std::size_t k_ = 0;
    std::size_t n_ = 0;
    std::size_t npad_ = 0;
    std::vector<double> data_;
};

/// C = A·B with a packed B; same summation order as gemm().
void gemm(const double* a, const PackedMatrix& b, double* c, std::size_t m, bool accumulate = false);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

enum class ElementOp { kAdd, kSub, kMul, kSigmoid, kTanh, kRelu };

/// Applies a unary or binary elementwise operation. For binary ops `b` must
/// have the shape of `a` or be a rank-1 vector matching a's last extent.
Tensor elementwise(ElementOp op, const Tensor& a, const std::optional<Tensor>& b = std::nullopt);

double sigmoid(double x) noexcept;

/// Flattens all axes into one.
Tensor flatten(const Tensor& x);
/// Concatenates rank-1 tensors end to end.
Tensor concat(std::span<const Tensor> parts);

/// Seeded pseudo-random source built on std::mt19937_64, whose output
/// sequence is fixed by the C++ standard. Conversions to doubles and bounded
/// integers are implemented here rather than through the implementation-defined
/// standard distributions, so draws are identical across toolchains.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }
    static constexpr std::string_view algorithm() { return "mt19937_64"; }

    /// Independent stream keyed by (seed, label). Children do not consume
    /// draws from the parent.
    RandomSource child(std::string_view label) const;

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer on [0, n), unbiased.
    std::uint64_t below(std::uint64_t n);
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// Mixes a seed with a label into a new seed (splitmix64 over FNV-1a).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

/// Compares an analytic gradient against central differences of `f` at `x`.
/// Returns max_i |g_i - c_i| / max(1, |g_i|, |c_i|).
double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& analytic_grad,
                  const Tensor& x, double eps = 1e-5);

}  // namespace mcdfn
