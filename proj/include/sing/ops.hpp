#pragma once

// Differentiable operators. Matrices are 2-D row-major tensors; sequences
// and signals use the channels x time layout throughout, so a mono waveform
// is a 1 x L tensor and a column vector is H x 1.

#include <cstddef>
#include <span>
#include <vector>

#include "sing/grad.hpp"

namespace sing::grad {

// Elementwise, identical shapes.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
template <typename T> Var<T> add_scalar(const Var<T>& a, T offset);

// ReLU subgradient at 0 is 0.
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> sigmoid(const Var<T>& a);
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> log(const Var<T>& a);
template <typename T> Var<T> square(const Var<T>& a);
// Subgradient at 0 is 0.
template <typename T> Var<T> abs(const Var<T>& a);

// Reductions to a single-element tensor.
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);

/// (m x k) . (k x n)
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// Adds a per-row bias (C entries) to every column of a C x T matrix.
template <typename T> Var<T> add_bias(const Var<T>& x, const Var<T>& bias);
/// Multiplies every length-K row of the last axis by a constant window.
template <typename T> Var<T> mul_window(const Var<T>& x, std::span<const double> window);

template <typename T> Var<T> transpose(const Var<T>& a);
/// Half-open range [begin, end) along axis 0 (rows) or 1 (columns).
template <typename T> Var<T> slice(const Var<T>& a, std::size_t axis, std::size_t begin, std::size_t end);
template <typename T> Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);
/// Zero padding along the column (time) axis.
template <typename T> Var<T> pad_cols(const Var<T>& a, std::size_t left, std::size_t right);
/// E x 1 column repeated into E x n.
template <typename T> Var<T> repeat_cols(const Var<T>& column, std::size_t n);

/// Row `index` of a V x E table, returned as an E x 1 column. Backward
/// scatters into that row only.
template <typename T> Var<T> embedding_lookup(const Var<T>& table, std::size_t index);

/// Valid cross-correlation. input C_in x T, kernel C_out x C_in x K, bias
/// C_out (may be undefined). Output C_out x ((T - K) / stride + 1).
template <typename T>
Var<T> conv1d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias, std::size_t stride);

/// Overlap-add scatter, the adjoint of conv1d. input C_in x N, kernel
/// C_in x C_out x K. Output C_out x ((N - 1) * stride + K).
template <typename T>
Var<T> conv_transpose1d(const Var<T>& input, const Var<T>& kernel, std::size_t stride);

/// Windowed STFT of a flat signal, as paired real and imaginary parts,
/// each frames x (frame_size / 2 + 1).
template <typename T>
struct StftParts {
  Var<T> re;
  Var<T> im;
};

template <typename T>
StftParts<T> stft(const Var<T>& signal, std::size_t frame_size, std::size_t hop,
                  std::span<const double> window);

/// re^2 + im^2.
template <typename T>
Var<T> power(const StftParts<T>& s) {
  return add(square(s.re), square(s.im));
}

}  // namespace sing::grad
