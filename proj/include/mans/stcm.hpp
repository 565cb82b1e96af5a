#pragma once

// Convolutional classifier over the recalibrated coordinate planes, stacked as a
// 3-channel image: a 5x5 stride-2 stem followed by two stages of pre-activation
// (BN -> ReLU -> Conv) block pairs, a final BN-ReLU, global average pooling and a
// fully connected softmax layer.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mans/ops.hpp"
#include "mans/params.hpp"
#include "mans/tensor.hpp"

namespace mans {

enum class Depth { kMans9, kMans33, kMans61 };

std::string depth_name(Depth d);
std::optional<Depth> parse_depth(const std::string& name);

struct StcmConfig {
  Depth depth = Depth::kMans9;
  std::size_t in_channels = 3;
  std::size_t width1 = 64;  // stem and stage 1
  std::size_t width2 = 128;  // stage 2
  int stem_kernel = 5;
  int stem_stride = 2;
  int stem_pad = 2;
  bool use_shortcuts = true;
  std::size_t num_classes = 4;

  /// Block pairs per stage: 2, 8 or 15.
  std::size_t pairs() const;
  /// Stem plus two convolutions per block: 9, 33 or 61.
  std::size_t conv_layers() const { return 1 + 4 * pairs(); }
};

template <typename T>
struct BnLayer {
  explicit BnLayer(std::size_t channels)
      : gamma(constant_parameter<T>(Shape{channels}, T(1))),
        beta(constant_parameter<T>(Shape{channels}, T(0))),
        state(channels) {}

  Tensor<T> gamma;
  Tensor<T> beta;
  ops::BatchNormState<T> state;

  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& x, Mode mode) {
    return ops::batchnorm2d(tape, x, gamma, beta, state, mode);
  }
  void collect(const std::string& prefix, NamedTensors<T>& params) const;
  void collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const;
};

template <typename T>
struct ConvBlock {
  BnLayer<T> bn1;
  Tensor<T> conv1;  // [Cout x Cin x 3 x 3]
  BnLayer<T> bn2;
  Tensor<T> conv2;  // [Cout x Cout x 3 x 3]
  Tensor<T> proj;   // [Cout x Cin x 1 x 1] when the shape changes, else undefined
  int stride = 1;
};

template <typename T>
struct StcmParams {
  StcmConfig config;
  BnLayer<T> stem_bn;
  Tensor<T> stem_conv;
  std::vector<ConvBlock<T>> stage1;
  std::vector<ConvBlock<T>> stage2;
  BnLayer<T> head_bn;
  Tensor<T> fc_w;  // [width2 x C]
  Tensor<T> fc_b;  // [C]

  /// Convolutions from N(0, 2/fan_in); classifier from uniform(-1/sqrt(fan_in), +).
  static StcmParams init(const StcmConfig& config, Rng& rng);

  void collect(NamedTensors<T>& params) const;
  /// Batch-normalization running statistics (not learnable, but checkpointed).
  void collect_buffers(NamedTensors<T>& buffers) const;
};

/// Output shape of one named layer during a forward pass.
struct LayerTrace {
  std::string name;
  Shape shape;
  bool conv = false;  // a counted conv layer (projections excluded)
};

/// Conv(ReLU(BN(Conv(ReLU(BN(x)))))) plus the identity or projected shortcut when enabled.
template <typename T>
Tensor<T> conv_block_forward(Tape<T>& tape, ConvBlock<T>& block, const Tensor<T>& x, Mode mode,
                             bool use_shortcuts, std::vector<LayerTrace>* trace = nullptr,
                             const std::string& name = "block");

/// [B x 3 x H x W] -> F_C [B x width2].
template <typename T>
Tensor<T> stcm_forward(Tape<T>& tape, StcmParams<T>& params, const Tensor<T>& image, Mode mode,
                       std::vector<LayerTrace>* trace = nullptr);

template <typename T>
struct Classification {
  Tensor<T> logits;
  Tensor<T> probs;
  std::vector<int> predicted;
};

template <typename T>
Classification<T> classify(Tape<T>& tape, const StcmParams<T>& params, const Tensor<T>& features);

}  // namespace mans
