#pragma once

// Temporal attention recalibration for one coordinate plane.
//
// A T x N plane is resized to T x K by a fully connected layer, summarized by a
// bidirectional GRU (memory branch) and re-weighted frame by frame through a
// pooled bottleneck (attention branch). The product is resized back to T x N and
// added to the unchanged input.

#include <cstddef>
#include <string>

#include "mans/params.hpp"
#include "mans/recurrent.hpp"
#include "mans/tensor.hpp"

namespace mans {

enum class Coordinate { kX = 0, kY = 1, kZ = 2 };

char coordinate_tag(Coordinate c);

template <typename T>
struct CoordMatrix {
  Tensor<T> values;  // [T x N]
  Coordinate coordinate = Coordinate::kX;
};

struct TarmShape {
  std::size_t frames = 50;
  std::size_t joints = 50;
  std::size_t hidden = 64;
  std::size_t alpha = 16;
  bool attention_bias = true;

  /// Rows of the reduction layer: max(1, floor(frames / alpha)).
  std::size_t bottleneck() const;
};

template <typename T>
struct TarmParams {
  Tensor<T> fc_in_w;   // [N x K]
  Tensor<T> fc_in_b;   // [K]
  BiGruParams<T> bigru;
  Tensor<T> w1;        // [M x T]
  Tensor<T> b1;        // [M x 1], undefined without attention bias
  Tensor<T> w2;        // [T x M]
  Tensor<T> b2;        // [T x 1]
  Tensor<T> fc_out_w;  // [K x N]
  Tensor<T> fc_out_b;  // [N]

  std::size_t frames() const { return w1.dim(1); }
  std::size_t joints() const { return fc_in_w.dim(0); }
  std::size_t hidden() const { return fc_in_w.dim(1); }
  std::size_t bottleneck() const { return w1.dim(0); }
  bool has_attention_bias() const { return b1.defined(); }

  /// Fully connected maps from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); GRU per its own rule.
  static TarmParams init(const TarmShape& shape, Rng& rng);
  static TarmParams zeros(const TarmShape& shape);

  /// Appends "<prefix>.fc_in.w", "<prefix>.bigru.fwd.Wz", ... in a fixed order.
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

template <typename T>
struct TarmMemory {
  Tensor<T> f_m;        // [T x K]
  Tensor<T> x_resized;  // [T x K]
};

/// Memory branch: x_resized = fc_in(x), f_m = bigru(x_resized).
template <typename T>
TarmMemory<T> tarm_memory(Tape<T>& tape, const TarmParams<T>& p, const CoordMatrix<T>& x);

/// Attention branch: frame means of x_resized, repeated K times, through
/// sigmoid(W2 . relu(W1 . X + b1) + b2). Every entry lies in (0, 1) and all K
/// columns are equal.
template <typename T>
Tensor<T> tarm_attention(Tape<T>& tape, const TarmParams<T>& p, const Tensor<T>& x_resized);

/// x + fc_out(f_m * f_a). With `use_attention` false the attention weights are all ones.
template <typename T>
CoordMatrix<T> tarm_forward(Tape<T>& tape, const TarmParams<T>& p, const CoordMatrix<T>& x,
                            bool use_attention = true);

/// tarm_forward over a batch of planes [B x T x N] at once. Per sample the result
/// equals tarm_forward up to floating-point reassociation.
template <typename T>
Tensor<T> tarm_forward_batch(Tape<T>& tape, const TarmParams<T>& p, const Tensor<T>& x,
                             bool use_attention = true);

}  // namespace mans
