#pragma once

// Three coordinate-wise TARMs feeding one STCM, plus SGD training and evaluation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mans/data.hpp"
#include "mans/ops.hpp"
#include "mans/params.hpp"
#include "mans/stcm.hpp"
#include "mans/tarm.hpp"
#include "mans/tensor.hpp"

namespace mans {

enum class Variant { kFull, kNoAttention, kStcmOnly };

std::string variant_name(Variant v);
std::optional<Variant> parse_variant(const std::string& name);

struct ExperimentConfig {
  std::size_t frames = 50;  // T
  std::size_t joints = 50;  // N
  std::size_t hidden = 64;  // K
  std::size_t alpha = 16;
  Depth depth = Depth::kMans9;
  std::size_t width1 = 64;
  std::size_t width2 = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::size_t batch_size = 16;
  std::size_t epochs = 100;
  std::uint64_t seed = 1;
  std::size_t num_classes = 4;
  Variant variant = Variant::kFull;
  bool use_shortcuts = true;
  bool attention_bias = true;

  /// Throws ArgumentError on non-positive sizes, alpha > frames or negative rates.
  void validate() const;
  TarmShape tarm_shape() const;
  StcmConfig stcm_config() const;
};

template <typename T>
struct MansModel {
  ExperimentConfig config;
  std::array<TarmParams<T>, 3> tarm;  // x, y, z
  StcmParams<T> stcm;

  /// Parameters drawn from an RNG seeded with config.seed. Every variant
  /// initializes the same tensors in the same order.
  static MansModel init(const ExperimentConfig& config);

  /// Learnable tensors: "tarm.{x,y,z}.*" followed by "stcm.*".
  NamedTensors<T> parameters() const;
  /// Parameters that influence the output under the configured variant.
  NamedTensors<T> trainable() const;
  /// Batch-normalization running statistics.
  NamedTensors<T> buffers() const;
};

/// Total element count of `parameters()`.
template <typename T>
std::size_t parameter_count(const MansModel<T>& model);

/// batch [B x T x N x 3] -> logits [B x num_classes]. Each sample's x, y and z
/// planes go through their TARM (skipped for stcm_only) and are stacked into a
/// B x 3 x T x N image for the STCM.
template <typename T>
Tensor<T> mans_forward(Tape<T>& tape, MansModel<T>& model, const Tensor<T>& batch, Mode mode,
                       std::vector<LayerTrace>* trace = nullptr);

template <typename T>
struct Batch {
  Tensor<T> inputs;  // [B x T x N x 3]
  std::vector<int> labels;
};

template <typename T>
Batch<T> make_batch(std::span<const GridSample> samples, std::span<const std::size_t> indices);
template <typename T>
Batch<T> make_batch(std::span<const GridSample> samples);

template <typename T>
struct SgdState {
  std::vector<Tensor<T>> velocity;  // aligned with model.parameters()
};

struct StepResult {
  double loss = 0.0;  // before the update
  std::size_t correct = 0;
};

/// Forward, cross-entropy, backward, then v <- momentum v - lr (g + wd p); p <- p + v.
/// A non-finite loss throws NumericalError naming the first non-finite tape node.
template <typename T>
StepResult train_step(MansModel<T>& model, SgdState<T>& state, const Batch<T>& batch);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  std::size_t total = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

/// Eval-mode accuracy, mean loss and confusion matrix. Empty input throws ArgumentError.
template <typename T>
EvalResult evaluate(MansModel<T>& model, std::span<const GridSample> samples,
                    std::size_t batch_size = 32);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<EvalResult> val;
  std::optional<EvalResult> test;
};

struct FitOptions {
  /// Called after every epoch; returning false stops training.
  std::function<bool(const EpochMetrics&)> on_epoch;
  bool evaluate_test = true;
};

/// Mini-batch SGD over split.train for config.epochs epochs, reshuffled every
/// epoch from the run seed. Returns the metrics of every completed epoch.
std::vector<EpochMetrics> fit(MansModel<float>& model, const GridSplit& split,
                              const FitOptions& options = {});

}  // namespace mans
