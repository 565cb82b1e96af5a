#include "mans/stcm.hpp"

#include <algorithm>
#include <cmath>

#include "mans/errors.hpp"

namespace mans {

std::string depth_name(Depth d) {
  switch (d) {
    case Depth::kMans9:
      return "mans9";
    case Depth::kMans33:
      return "mans33";
    case Depth::kMans61:
      return "mans61";
  }
  return "?";
}

std::optional<Depth> parse_depth(const std::string& name) {
  if (name == "mans9") return Depth::kMans9;
  if (name == "mans33") return Depth::kMans33;
  if (name == "mans61") return Depth::kMans61;
  return std::nullopt;
}

std::size_t StcmConfig::pairs() const {
  switch (depth) {
    case Depth::kMans9:
      return 2;
    case Depth::kMans33:
      return 8;
    case Depth::kMans61:
      return 15;
  }
  return 0;
}

template <typename T>
void BnLayer<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  params.emplace_back(prefix + ".gamma", gamma);
  params.emplace_back(prefix + ".beta", beta);
}

template <typename T>
void BnLayer<T>::collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const {
  buffers.emplace_back(prefix + ".running_mean", state.running_mean);
  buffers.emplace_back(prefix + ".running_var", state.running_var);
}

namespace {

template <typename T>
Tensor<T> he_kernel(std::size_t cout, std::size_t cin, std::size_t k, Rng& rng) {
  return normal_parameter<T>(Shape{cout, cin, k, k}, std::sqrt(2.0 / static_cast<double>(cin * k * k)),
                             rng);
}

template <typename T>
ConvBlock<T> make_block(std::size_t cin, std::size_t cout, int stride, Rng& rng) {
  BnLayer<T> bn1(cin);
  auto conv1 = he_kernel<T>(cout, cin, 3, rng);
  BnLayer<T> bn2(cout);
  auto conv2 = he_kernel<T>(cout, cout, 3, rng);
  Tensor<T> proj;
  if (cin != cout || stride != 1) proj = he_kernel<T>(cout, cin, 1, rng);
  return {std::move(bn1), std::move(conv1), std::move(bn2), std::move(conv2), std::move(proj),
          stride};
}

template <typename T>
void collect_block(const std::string& prefix, const ConvBlock<T>& b, NamedTensors<T>& out) {
  b.bn1.collect(prefix + ".bn1", out);
  out.emplace_back(prefix + ".conv1.w", b.conv1);
  b.bn2.collect(prefix + ".bn2", out);
  out.emplace_back(prefix + ".conv2.w", b.conv2);
  if (b.proj.defined()) out.emplace_back(prefix + ".proj.w", b.proj);
}

template <typename T>
void record(std::vector<LayerTrace>* trace, std::string name, const Tensor<T>& t, bool conv) {
  if (trace) trace->push_back({std::move(name), t.shape(), conv});
}

}  // namespace

template <typename T>
StcmParams<T> StcmParams<T>::init(const StcmConfig& config, Rng& rng) {
  if (config.num_classes < 1) throw ArgumentError("stcm: num_classes must be positive");
  BnLayer<T> stem_bn(config.in_channels);
  auto stem_conv = he_kernel<T>(config.width1, config.in_channels,
                                static_cast<std::size_t>(config.stem_kernel), rng);
  std::vector<ConvBlock<T>> stage1;
  std::vector<ConvBlock<T>> stage2;
  for (std::size_t i = 0; i < config.pairs(); ++i) {
    stage1.push_back(make_block<T>(config.width1, config.width1, 1, rng));
  }
  for (std::size_t i = 0; i < config.pairs(); ++i) {
    const bool first = i == 0;
    stage2.push_back(make_block<T>(first ? config.width1 : config.width2, config.width2,
                                   first ? 2 : 1, rng));
  }
  BnLayer<T> head_bn(config.width2);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.width2));
  auto fc_w = uniform_parameter<T>(Shape{config.width2, config.num_classes}, bound, rng);
  auto fc_b = uniform_parameter<T>(Shape{config.num_classes}, bound, rng);
  return {config,        std::move(stem_bn), std::move(stem_conv), std::move(stage1),
          std::move(stage2), std::move(head_bn), std::move(fc_w),  std::move(fc_b)};
}

template <typename T>
void StcmParams<T>::collect(NamedTensors<T>& out) const {
  stem_bn.collect("stcm.stem.bn", out);
  out.emplace_back("stcm.stem.conv.w", stem_conv);
  for (std::size_t i = 0; i < stage1.size(); ++i) {
    collect_block("stcm.s1.b" + std::to_string(i), stage1[i], out);
  }
  for (std::size_t i = 0; i < stage2.size(); ++i) {
    collect_block("stcm.s2.b" + std::to_string(i), stage2[i], out);
  }
  head_bn.collect("stcm.head.bn", out);
  out.emplace_back("stcm.fc.w", fc_w);
  out.emplace_back("stcm.fc.b", fc_b);
}

template <typename T>
void StcmParams<T>::collect_buffers(NamedTensors<T>& out) const {
  stem_bn.collect_buffers("stcm.stem.bn", out);
  auto blocks = [&out](const std::string& stage, const std::vector<ConvBlock<T>>& list) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string prefix = stage + ".b" + std::to_string(i);
      list[i].bn1.collect_buffers(prefix + ".bn1", out);
      list[i].bn2.collect_buffers(prefix + ".bn2", out);
    }
  };
  blocks("stcm.s1", stage1);
  blocks("stcm.s2", stage2);
  head_bn.collect_buffers("stcm.head.bn", out);
}

template <typename T>
Tensor<T> conv_block_forward(Tape<T>& tape, ConvBlock<T>& block, const Tensor<T>& x, Mode mode,
                             bool use_shortcuts, std::vector<LayerTrace>* trace,
                             const std::string& name) {
  if (x.rank() != 4 || x.dim(1) != block.conv1.dim(1)) {
    throw DimensionError("conv_block: input " + shape_string(x.shape()) +
                         " does not match kernels " + shape_string(block.conv1.shape()));
  }
  auto h = ops::relu(tape, block.bn1.forward(tape, x, mode));
  h = ops::conv2d(tape, h, block.conv1, block.stride, 1);
  record(trace, name + ".conv1", h, true);
  h = ops::relu(tape, block.bn2.forward(tape, h, mode));
  h = ops::conv2d(tape, h, block.conv2, 1, 1);
  record(trace, name + ".conv2", h, true);
  if (!use_shortcuts) return h;
  Tensor<T> shortcut = block.proj.defined() ? ops::conv2d(tape, x, block.proj, block.stride, 0) : x;
  return ops::add(tape, h, shortcut);
}

template <typename T>
Tensor<T> stcm_forward(Tape<T>& tape, StcmParams<T>& params, const Tensor<T>& image, Mode mode,
                       std::vector<LayerTrace>* trace) {
  const StcmConfig& cfg = params.config;
  if (image.rank() != 4 || image.dim(1) != cfg.in_channels) {
    throw DimensionError("stcm: expected [B x " + std::to_string(cfg.in_channels) +
                         " x H x W] input, got " + shape_string(image.shape()));
  }
  const std::size_t span = std::min(image.dim(2), image.dim(3)) + 2 * cfg.stem_pad;
  if (span < static_cast<std::size_t>(cfg.stem_kernel)) {
    throw DimensionError("stcm: input " + shape_string(image.shape()) +
                         " is too small for the stem kernel");
  }
  record(trace, "input", image, false);
  auto h = ops::relu(tape, params.stem_bn.forward(tape, image, mode));
  h = ops::conv2d(tape, h, params.stem_conv, cfg.stem_stride, cfg.stem_pad);
  record(trace, "stem.conv", h, true);

  auto run_stage = [&](const std::string& stage, std::vector<ConvBlock<T>>& blocks) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      h = conv_block_forward(tape, blocks[i], h, mode, cfg.use_shortcuts, trace,
                             stage + ".b" + std::to_string(i));
    }
  };
  run_stage("s1", params.stage1);
  run_stage("s2", params.stage2);

  h = ops::relu(tape, params.head_bn.forward(tape, h, mode));
  const std::size_t batch = h.dim(0);
  const std::size_t channels = h.dim(1);
  auto flat = ops::reshape(tape, h, Shape{batch, channels, h.dim(2) * h.dim(3)});
  auto pooled = ops::reduce_mean(tape, flat, 2);
  if (trace) trace->push_back({"pool", Shape{batch, channels, 1, 1}, false});
  return pooled;
}

template <typename T>
Classification<T> classify(Tape<T>& tape, const StcmParams<T>& params, const Tensor<T>& features) {
  if (features.rank() != 2 || features.dim(1) != params.fc_w.dim(0)) {
    throw DimensionError("classify: features " + shape_string(features.shape()) +
                         " do not match classifier " + shape_string(params.fc_w.shape()));
  }
  auto logits = ops::affine(tape, features, params.fc_w, params.fc_b);
  auto probs = ops::softmax(logits);
  const std::size_t classes = logits.dim(1);
  std::vector<int> predicted(logits.dim(0));
  for (std::size_t r = 0; r < predicted.size(); ++r) {
    const T* row = probs.raw() + r * classes;
    predicted[r] = static_cast<int>(std::max_element(row, row + classes) - row);
  }
  return {logits, probs, std::move(predicted)};
}

#define MANS_INSTANTIATE_STCM(T)                                                               \
  template struct BnLayer<T>;                                                                  \
  template struct StcmParams<T>;                                                               \
  template Tensor<T> conv_block_forward<T>(Tape<T>&, ConvBlock<T>&, const Tensor<T>&, Mode,    \
                                           bool, std::vector<LayerTrace>*, const std::string&); \
  template Tensor<T> stcm_forward<T>(Tape<T>&, StcmParams<T>&, const Tensor<T>&, Mode,         \
                                     std::vector<LayerTrace>*);                                \
  template Classification<T> classify<T>(Tape<T>&, const StcmParams<T>&, const Tensor<T>&);

MANS_INSTANTIATE_STCM(float)
MANS_INSTANTIATE_STCM(double)

#undef MANS_INSTANTIATE_STCM

}  // namespace mans
