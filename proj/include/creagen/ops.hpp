#pragma once

#include <cstddef>
#include <span>

#include "creagen/tensor.hpp"

namespace creagen {

// Broadcasting rule for binary elementwise ops: shapes must match exactly, or one
// operand's shape must equal the other's shape with the leading (batch)
// dimension removed, in which case it is repeated across that dimension.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

Tensor reshape(const Tensor& a, Shape shape);
/// [N, ...] -> [N, prod(...)]
Tensor flatten(const Tensor& a);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);

/// [m, k] x [k, n] -> [m, n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [N, in], weight [out, in], bias [out] (may be undefined) -> [N, out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sums out `axis`; the result drops that dimension.
Tensor sum_axis(const Tensor& a, std::size_t axis);

Tensor abs(const Tensor& a);
/// Rejects non-positive entries.
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
/// Elementwise a^p. Non-integer exponents require positive entries.
Tensor pow(const Tensor& a, double p);
/// max(a, floor); gradient flows only where a > floor.
Tensor clamp_min(const Tensor& a, double floor);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// log(sigmoid(a)), evaluated without overflow for large |a|.
Tensor log_sigmoid(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

enum class Activation { identity, relu, leaky_relu, tanh, sigmoid };
Tensor activate(const Tensor& a, Activation kind);

struct Padding {
    enum class Mode { zeros, reflect };
    Mode mode = Mode::zeros;
    std::size_t amount = 0;

    static Padding zeros(std::size_t k) { return {Mode::zeros, k}; }
    static Padding reflect(std::size_t k) { return {Mode::reflect, k}; }
};

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);
std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                       std::size_t pad, std::size_t output_padding = 0);

/// x [N, Cin, H, W], weight [Cout, Cin, k, k], bias [Cout] or undefined.
/// Output side: floor((H + 2*pad - k) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              Padding padding);

/// x [N, Cin, H, W], weight [Cin, Cout, k, k], bias [Cout] or undefined.
/// Output side: (H - 1) * stride - 2*pad + k + output_padding, with
/// output_padding < stride. Zero padding only. Exact adjoint of conv2d with the
/// same kernel geometry.
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        std::size_t stride, Padding padding, std::size_t output_padding = 0);

struct BatchNormStats {
    Tensor running_mean;
    Tensor running_var;

    static BatchNormStats fresh(std::size_t channels);
};

enum class NormMode { train, eval };

/// Per-channel normalization of x [N, C] or [N, C, H, W]. Train mode uses batch
/// statistics (biased variance) and, if `update_stats`, folds them into the
/// running estimates (unbiased variance) with the given momentum.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                  NormMode mode, bool update_stats = true, double momentum = 0.1, double eps = 1e-5);

}  // namespace creagen
