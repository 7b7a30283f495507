#pragma once

#include <span>
#include <vector>

#include "wm/numerics/rng.hpp"
#include "wm/numerics/tensor.hpp"

// Differentiable operations on Tensor<T>. Each records a backward closure
// when gradient mode is on and at least one input requires a gradient.
// Shape mismatches throw DimensionError.
namespace wm {

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// y = x W (+ b). x: batch x in, W: in x out, b: 1 x out (may be undefined).
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
// Adds a 1 x n row to every row of x.
template <typename T> Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T value);
// 1 - x, elementwise.
template <typename T> Tensor<T> one_minus(const Tensor<T>& x);

template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);

// Row-wise softmax with max subtraction. NaN input throws NumericError.
template <typename T> Tensor<T> softmax(const Tensor<T>& z);
template <typename T> Tensor<T> log_softmax(const Tensor<T>& z);
// Negative log-likelihood of `target` under softmax(logits); logits is 1 x V.
template <typename T> Tensor<T> cross_entropy(const Tensor<T>& logits, int target);
// x - max(x) for a single row; the gradient of the max flows to the argmax.
template <typename T> Tensor<T> subtract_row_max(const Tensor<T>& x);

template <typename T> Tensor<T> concat_cols(std::span<const Tensor<T>> parts);
template <typename T> Tensor<T> concat_rows(std::span<const Tensor<T>> parts);
template <typename T> Tensor<T> slice_cols(const Tensor<T>& x, Eigen::Index start, Eigen::Index count);
template <typename T> Tensor<T> slice_rows(const Tensor<T>& x, Eigen::Index start, Eigen::Index count);
// Copy of x with rows [start, start + rows(r)) replaced by r.
template <typename T> Tensor<T> set_rows(const Tensor<T>& x, Eigen::Index start, const Tensor<T>& r);
// Embedding lookup: one output row per id.
template <typename T> Tensor<T> gather_rows(const Tensor<T>& table, std::span<const int> ids);
template <typename T> Tensor<T> mean_rows(const Tensor<T>& x);
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> transpose(const Tensor<T>& x);
// Row k of x (K x d) multiplied by w[k] (w is 1 x K).
template <typename T> Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& w);

// Inverted dropout; identity when !training or rate == 0. rate >= 1 throws ConfigError.
template <typename T> Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng& rng);
// Same value, no gradient path.
template <typename T> Tensor<T> detach(const Tensor<T>& x);

// Convenience overloads for initializer lists.
template <typename T>
Tensor<T> concat_cols(std::initializer_list<Tensor<T>> parts) {
  std::vector<Tensor<T>> v(parts);
  return concat_cols<T>(std::span<const Tensor<T>>(v));
}
template <typename T>
Tensor<T> concat_rows(std::initializer_list<Tensor<T>> parts) {
  std::vector<Tensor<T>> v(parts);
  return concat_rows<T>(std::span<const Tensor<T>>(v));
}

}  // namespace wm
