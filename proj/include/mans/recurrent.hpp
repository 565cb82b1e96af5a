#pragma once

#include <cstddef>
#include <string>

#include "mans/params.hpp"
#include "mans/tensor.hpp"

namespace mans {

/// One GRU direction. Weights use the row-vector convention: a gate
/// pre-activation is x . W + h . U + b, with every matrix K x K.
template <typename T>
struct GruParams {
  Tensor<T> wz, wr, wh;
  Tensor<T> uz, ur, uh;
  Tensor<T> bz, br, bh;

  std::size_t hidden() const { return bz.numel(); }

  static GruParams zeros(std::size_t k);
  /// Every weight and bias from uniform(-1/sqrt(K), 1/sqrt(K)).
  static GruParams uniform(std::size_t k, Rng& rng);

  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

template <typename T>
struct BiGruParams {
  GruParams<T> forward;
  GruParams<T> backward;

  std::size_t hidden() const { return forward.hidden(); }

  static BiGruParams zeros(std::size_t k) { return {GruParams<T>::zeros(k), GruParams<T>::zeros(k)}; }
  static BiGruParams uniform(std::size_t k, Rng& rng) {
    auto fwd = GruParams<T>::uniform(k, rng);
    auto bwd = GruParams<T>::uniform(k, rng);
    return {std::move(fwd), std::move(bwd)};
  }

  void collect(const std::string& prefix, NamedTensors<T>& out) const {
    forward.collect(prefix + ".fwd", out);
    backward.collect(prefix + ".bwd", out);
  }
};

/// One recurrence step on rows [B x K]:
///   z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
///   c = tanh(x Wh + (r * h) Uh + bh), h' = (1 - z) * h + z * c.
template <typename T>
Tensor<T> gru_step(Tape<T>& tape, const GruParams<T>& p, const Tensor<T>& x_t,
                   const Tensor<T>& h_prev);

/// Runs the forward direction over rows 0..T-1 and the backward direction over
/// T-1..0, both from zero state, and returns their per-frame sum [T x K].
/// A [T x B x K] input runs B independent sequences side by side.
template <typename T>
Tensor<T> bigru_forward(Tape<T>& tape, const BiGruParams<T>& p, const Tensor<T>& x);

}  // namespace mans
