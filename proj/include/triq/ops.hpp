#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "triq/tensor.hpp"

// Differentiable primitives. Every op takes an optional tape: when it is
// non-null and some input requires a gradient, the op records its backward
// rule there and the result requires a gradient too. Passing nullptr runs a
// plain forward computation. Results are checked for NaN/Inf (NumericError).
namespace triq::ops {

Tensor add(const Tensor& a, const Tensor& b, GradTape* tape = nullptr);
/// x[..., n] + bias[n], broadcast over all leading axes.
Tensor add_bias(const Tensor& x, const Tensor& bias, GradTape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, GradTape* tape = nullptr);
Tensor scale(const Tensor& x, double factor, GradTape* tape = nullptr);
Tensor sum(const Tensor& x, GradTape* tape = nullptr);

Tensor matmul(const Tensor& a, const Tensor& b, GradTape* tape = nullptr);
Tensor transpose(const Tensor& x, GradTape* tape = nullptr);

/// Exact GELU, x * Phi(x).
Tensor gelu(const Tensor& x, GradTape* tape = nullptr);
/// Softmax over the last axis, max-subtracted.
Tensor softmax(const Tensor& x, GradTape* tape = nullptr);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6,
                  GradTape* tape = nullptr);

/// Cross-correlation of an [h, w, c_in] grid with [k, k, c_in, c_out] kernels.
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride, std::size_t zero_pad,
              GradTape* tape = nullptr);
/// Channel-wise max over pool x pool windows; partial edge windows are kept.
Tensor maxpool2d(const Tensor& input, std::size_t pool, GradTape* tape = nullptr);
/// Zero-pads an [h, w, c] grid on the bottom and right to [height, width, c].
Tensor pad_bottom_right(const Tensor& input, std::size_t height, std::size_t width,
                        GradTape* tape = nullptr);

Tensor reshape(const Tensor& x, Shape shape, GradTape* tape = nullptr);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count, GradTape* tape = nullptr);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count, GradTape* tape = nullptr);
Tensor concat_rows(std::span<const Tensor> parts, GradTape* tape = nullptr);
Tensor concat_cols(std::span<const Tensor> parts, GradTape* tape = nullptr);

/// Inverted dropout: zeroes each element with probability `rate` and scales
/// survivors by 1/(1-rate). rate == 0 returns the input unchanged.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng, GradTape* tape = nullptr);

/// -sum(target * ln(max(pred, floor))) for a probability vector `pred`.
Tensor cross_entropy(const Tensor& pred, std::span<const double> target, double floor = 1e-12,
                     GradTape* tape = nullptr);

}  // namespace triq::ops
