#pragma once

// Differentiable tensor operations.
//
// Every op computes its result eagerly and, when the tape is recording and an
// operand tracks gradients, records a rule that accumulates (+=) into the
// operands' gradient buffers. There is no implicit broadcasting.

#include <cstddef>
#include <span>
#include <vector>

#include "mans/tensor.hpp"

namespace mans {

enum class Mode { kTrain, kEval };

}  // namespace mans

namespace mans::ops {

enum class Elementwise { kAdd, kSub, kMul, kSigmoid, kTanh, kRelu };

/// Pointwise op. Binary kinds need `b` with the same shape as `a`; unary kinds ignore it.
template <typename T>
Tensor<T> elementwise(Tape<T>& tape, Elementwise kind, const Tensor<T>& a,
                      const Tensor<T>* b = nullptr);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(tape, Elementwise::kAdd, a, &b);
}
template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(tape, Elementwise::kSub, a, &b);
}
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(tape, Elementwise::kMul, a, &b);
}
template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& a) {
  return elementwise(tape, Elementwise::kSigmoid, a);
}
template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& a) {
  return elementwise(tape, Elementwise::kTanh, a);
}
template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& a) {
  return elementwise(tape, Elementwise::kRelu, a);
}

/// [M x K] . [K x P] -> [M x P].
template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// x . w + bias, with bias repeated over the rows of x.
template <typename T>
Tensor<T> affine(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

/// Arithmetic mean along `axis`; the axis is removed (a rank-1 input yields shape [1]).
template <typename T>
Tensor<T> reduce_mean(Tape<T>& tape, const Tensor<T>& x, std::size_t axis);

/// [T x 1] -> [T x k], every column a copy of x.
template <typename T>
Tensor<T> duplicate_cols(Tape<T>& tape, const Tensor<T>& x, std::size_t k);

/// Zero-padded cross-correlation. x: [B x Cin x H x W], kernels: [Cout x Cin x k x k].
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& kernels, int stride, int pad);

/// Running statistics owned by one batch-normalization layer.
template <typename T>
struct BatchNormState {
  explicit BatchNormState(std::size_t channels)
      : running_mean(Shape{channels}, T(0)), running_var(Shape{channels}, T(1)) {}

  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.9);
  T eps = T(1e-5);
};

/// Per-channel normalization of [B x C x H x W]. Train mode normalizes by the batch
/// statistics and folds them into `state`; eval mode uses the running statistics.
template <typename T>
Tensor<T> batchnorm2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                      const Tensor<T>& beta, BatchNormState<T>& state, Mode mode);

template <typename T>
struct CrossEntropy {
  Tensor<T> loss;   // scalar
  Tensor<T> probs;  // [B x C], not differentiable
};

/// Mean negative log-likelihood of `labels` under softmax(logits).
template <typename T>
CrossEntropy<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                      std::span<const int> labels);

/// Row-wise max-shifted softmax, outside autograd.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape);

/// Exchanges the two leading axes: [A x B x ...] -> [B x A x ...].
template <typename T>
Tensor<T> swap01(Tape<T>& tape, const Tensor<T>& x);

/// Slice `index` of the leading axis.
template <typename T>
Tensor<T> select(Tape<T>& tape, const Tensor<T>& x, std::size_t index);

/// Stacks equally shaped tensors along a new leading axis.
template <typename T>
Tensor<T> stack(Tape<T>& tape, const std::vector<Tensor<T>>& parts);

/// Sum of all elements as a scalar.
template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

}  // namespace mans::ops
