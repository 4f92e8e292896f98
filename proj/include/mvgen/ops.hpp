#pragma once

// Differentiable ops over TensorT. All run on float and double (explicit
// instantiations live in tensor.cpp). Layout is NCHW throughout; conv kernels
// are (out, in, k, k), transposed-conv kernels are (in, out, k, k).

#include <vector>

#include "mvgen/tensor.hpp"

namespace mvgen {

template <typename T> TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);
template <typename T> TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b);
template <typename T> TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);
template <typename T> TensorT<T> scale(const TensorT<T>& a, T s);
template <typename T> TensorT<T> add_scalar(const TensorT<T>& a, T s);

// x is (N, C, ...), bias is (C); broadcast over batch and trailing dims.
template <typename T> TensorT<T> add_bias(const TensorT<T>& x, const TensorT<T>& bias);

// (N, K) @ (K, M) -> (N, M)
template <typename T> TensorT<T> matmul(const TensorT<T>& x, const TensorT<T>& w);

template <typename T> TensorT<T> relu(const TensorT<T>& x);
template <typename T> TensorT<T> leaky_relu(const TensorT<T>& x, T slope);
template <typename T> TensorT<T> tanh_op(const TensorT<T>& x);
template <typename T> TensorT<T> sigmoid(const TensorT<T>& x);

template <typename T> TensorT<T> reshape(const TensorT<T>& x, std::vector<int> shape);

// Concatenate along axis 1; all other dims must match.
template <typename T> TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b);

template <typename T> TensorT<T> sum_all(const TensorT<T>& x);
template <typename T> TensorT<T> mean_all(const TensorT<T>& x);

// x (N, Cin, H, W), kernel (Cout, Cin, K, K) -> (N, Cout, OH, OW)
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& kernel, int stride, int pad);

// x (N, Cin, H, W), kernel (Cin, Cout, K, K) -> (N, Cout, OH, OW)
// with OH = (H-1)*stride - 2*pad + K. Adjoint of conv2d over the same
// kernel buffer: <conv2d(x,k), y> == <x, conv_transpose2d(y,k)>.
template <typename T>
TensorT<T> conv_transpose2d(const TensorT<T>& x, const TensorT<T>& kernel, int stride, int pad);

// x (N, C, ...): normalize per channel over batch and trailing dims.
// gamma/beta are (C) learnable; running_mean/running_var are (C) buffers
// mutated in training mode (exponential average, unbiased variance) and
// read in eval mode.
template <typename T>
TensorT<T> batch_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      TensorT<T>& running_mean, TensorT<T>& running_var, bool training,
                      T momentum = T(0.1), T eps = T(1e-5));

// Mean binary cross-entropy against a constant target; probabilities are
// clamped to [1e-7, 1-1e-7] and the clamp zeroes the gradient outside.
template <typename T> TensorT<T> bce_loss(const TensorT<T>& pred, T target);
// Elementwise-target variant; target is treated as a constant.
template <typename T> TensorT<T> bce_loss(const TensorT<T>& pred, const TensorT<T>& target);

// logits (N, K), labels in [0, K): mean of -log softmax(logits)[label].
template <typename T>
TensorT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels);

// Row-wise argmax of an (N, K) tensor; plain utility, not differentiable.
template <typename T> std::vector<int> argmax_rows(const TensorT<T>& logits);

}  // namespace mvgen
