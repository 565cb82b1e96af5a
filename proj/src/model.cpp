#include "mans/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mans/errors.hpp"

namespace mans {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull:
      return "full";
    case Variant::kNoAttention:
      return "no_attention";
    case Variant::kStcmOnly:
      return "stcm_only";
  }
  return "?";
}

std::optional<Variant> parse_variant(const std::string& name) {
  if (name == "full") return Variant::kFull;
  if (name == "no_attention") return Variant::kNoAttention;
  if (name == "stcm_only") return Variant::kStcmOnly;
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw ArgumentError(std::string(key) + " must be positive");
  };
  positive(frames, "T");
  positive(joints, "N");
  positive(hidden, "K");
  positive(alpha, "alpha");
  positive(width1, "width1");
  positive(width2, "width2");
  positive(batch_size, "batch_size");
  positive(epochs, "epochs");
  if (num_classes < 2) throw ArgumentError("num_classes must be at least 2");
  if (alpha > frames) throw ArgumentError("alpha must not exceed T");
  if (!(lr >= 0) || !(momentum >= 0) || !(weight_decay >= 0)) {
    throw ArgumentError("lr, momentum and weight_decay must be non-negative");
  }
}

TarmShape ExperimentConfig::tarm_shape() const {
  return {frames, joints, hidden, alpha, attention_bias};
}

StcmConfig ExperimentConfig::stcm_config() const {
  StcmConfig c;
  c.depth = depth;
  c.width1 = width1;
  c.width2 = width2;
  c.use_shortcuts = use_shortcuts;
  c.num_classes = num_classes;
  return c;
}

template <typename T>
MansModel<T> MansModel<T>::init(const ExperimentConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const TarmShape shape = config.tarm_shape();
  auto tx = TarmParams<T>::init(shape, rng);
  auto ty = TarmParams<T>::init(shape, rng);
  auto tz = TarmParams<T>::init(shape, rng);
  auto stcm = StcmParams<T>::init(config.stcm_config(), rng);
  return {config, {std::move(tx), std::move(ty), std::move(tz)}, std::move(stcm)};
}

template <typename T>
NamedTensors<T> MansModel<T>::parameters() const {
  NamedTensors<T> out;
  for (std::size_t c = 0; c < 3; ++c) {
    tarm[c].collect(std::string("tarm.") + coordinate_tag(static_cast<Coordinate>(c)), out);
  }
  stcm.collect(out);
  return out;
}

template <typename T>
NamedTensors<T> MansModel<T>::trainable() const {
  if (config.variant != Variant::kStcmOnly) return parameters();
  NamedTensors<T> out;
  stcm.collect(out);
  return out;
}

template <typename T>
NamedTensors<T> MansModel<T>::buffers() const {
  NamedTensors<T> out;
  stcm.collect_buffers(out);
  return out;
}

template <typename T>
std::size_t parameter_count(const MansModel<T>& model) {
  std::size_t n = 0;
  for (const auto& [name, t] : model.parameters()) n += t.numel();
  return n;
}

template <typename T>
Tensor<T> mans_forward(Tape<T>& tape, MansModel<T>& model, const Tensor<T>& batch, Mode mode,
                       std::vector<LayerTrace>* trace) {
  const ExperimentConfig& cfg = model.config;
  if (batch.rank() != 4 || batch.dim(1) != cfg.frames || batch.dim(2) != cfg.joints ||
      batch.dim(3) != 3) {
    throw DimensionError("mans_forward: expected [B x " + std::to_string(cfg.frames) + " x " +
                         std::to_string(cfg.joints) + " x 3] input, got " +
                         shape_string(batch.shape()));
  }
  const std::size_t samples = batch.dim(0);
  const std::size_t cells = cfg.frames * cfg.joints;
  std::vector<Tensor<T>> planes;
  for (std::size_t a = 0; a < 3; ++a) {
    Tensor<T> plane(Shape{samples, cfg.frames, cfg.joints});
    T* dst = plane.raw();
    const T* src = batch.raw();
    for (std::size_t i = 0; i < samples * cells; ++i) dst[i] = src[i * 3 + a];
    if (cfg.variant == Variant::kStcmOnly) {
      planes.push_back(plane);
    } else {
      planes.push_back(tarm_forward_batch(tape, model.tarm[a], plane, cfg.variant == Variant::kFull));
    }
  }
  // [3 x B x T x N] -> [B x 3 x T x N]
  auto image = ops::swap01(tape, ops::stack(tape, planes));
  auto features = stcm_forward(tape, model.stcm, image, mode, trace);
  return ops::affine(tape, features, model.stcm.fc_w, model.stcm.fc_b);
}

template <typename T>
Batch<T> make_batch(std::span<const GridSample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ArgumentError("make_batch: empty batch");
  const std::size_t frames = samples[indices[0]].frames;
  const std::size_t joints = samples[indices[0]].joints;
  const std::size_t cells = frames * joints;
  Batch<T> out{Tensor<T>(Shape{indices.size(), frames, joints, 3}), {}};
  T* dst = out.inputs.raw();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const GridSample& s = samples[indices[b]];
    if (s.frames != frames || s.joints != joints) {
      throw DimensionError("make_batch: samples of different grid sizes");
    }
    for (std::size_t i = 0; i < cells; ++i) {
      for (std::size_t a = 0; a < 3; ++a) {
        dst[(b * cells + i) * 3 + a] = static_cast<T>(s.planes[a * cells + i]);
      }
    }
    out.labels.push_back(s.label);
  }
  return out;
}

template <typename T>
Batch<T> make_batch(std::span<const GridSample> samples) {
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return make_batch<T>(samples, all);
}

namespace {

template <typename T>
std::size_t count_correct(const Tensor<T>& logits, std::span<const int> labels,
                          std::vector<std::vector<std::size_t>>* confusion = nullptr) {
  const std::size_t classes = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const T* row = logits.raw() + r * classes;
    const auto predicted = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
    if (predicted == static_cast<std::size_t>(labels[r])) ++correct;
    if (confusion) ++(*confusion)[static_cast<std::size_t>(labels[r])][predicted];
  }
  return correct;
}

}  // namespace

template <typename T>
StepResult train_step(MansModel<T>& model, SgdState<T>& state, const Batch<T>& batch) {
  const auto params = model.trainable();
  if (state.velocity.size() != params.size()) {
    state.velocity.clear();
    for (const auto& [name, p] : params) state.velocity.emplace_back(p.shape(), T(0));
  }
  for (auto [name, p] : params) p.clear_grad();

  Tape<T> tape;
  auto logits = mans_forward(tape, model, batch.inputs, Mode::kTrain);
  auto ce = ops::softmax_cross_entropy(tape, logits, std::span<const int>(batch.labels));
  const double loss = static_cast<double>(ce.loss.item());
  if (!std::isfinite(loss)) {
    std::string where = "the loss";
    if (auto i = tape.first_non_finite()) {
      where = "tape node " + std::to_string(*i) + " (" + tape.nodes()[*i].op + ")";
    }
    throw NumericalError("non-finite loss; first non-finite tensor is " + where);
  }
  tape.backward(ce.loss);

  const T lr = static_cast<T>(model.config.lr);
  const T mu = static_cast<T>(model.config.momentum);
  const T wd = static_cast<T>(model.config.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> p = params[i].second;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto v = state.velocity[i].data();
    auto w = p.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = mu * v[j] - lr * (g[j] + wd * w[j]);
      w[j] += v[j];
    }
  }
  return {loss, count_correct(logits, std::span<const int>(batch.labels))};
}

template <typename T>
EvalResult evaluate(MansModel<T>& model, std::span<const GridSample> samples,
                    std::size_t batch_size) {
  if (samples.empty()) throw ArgumentError("evaluate: empty dataset");
  if (batch_size == 0) throw ArgumentError("evaluate: batch_size must be positive");
  const std::size_t classes = model.config.num_classes;
  EvalResult result;
  result.total = samples.size();
  result.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  double loss_sum = 0.0;
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    indices.clear();
    for (std::size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) {
      if (samples[i].label < 0 || static_cast<std::size_t>(samples[i].label) >= classes) {
        throw ArgumentError("evaluate: label " + std::to_string(samples[i].label) +
                            " outside [0, " + std::to_string(classes) + ")");
      }
      indices.push_back(i);
    }
    auto batch = make_batch<T>(samples, indices);
    Tape<T> tape(false);
    auto logits = mans_forward(tape, model, batch.inputs, Mode::kEval);
    auto ce = ops::softmax_cross_entropy(tape, logits, std::span<const int>(batch.labels));
    loss_sum += static_cast<double>(ce.loss.item()) * static_cast<double>(indices.size());
    correct += count_correct(logits, std::span<const int>(batch.labels), &result.confusion);
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  result.loss = loss_sum / static_cast<double>(samples.size());
  return result;
}

std::vector<EpochMetrics> fit(MansModel<float>& model, const GridSplit& split,
                              const FitOptions& options) {
  const ExperimentConfig& cfg = model.config;
  if (split.train.empty()) throw ArgumentError("fit: empty training split");
  std::seed_seq seq{cfg.seed, std::uint64_t{0x5eed}};
  Rng shuffle_rng(seq);
  SgdState<float> state;
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochMetrics> history;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochMetrics m;
    m.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      auto batch = make_batch<float>(split.train,
                                     std::span<const std::size_t>(order).subspan(start, end - start));
      const auto step = train_step(model, state, batch);
      loss_sum += step.loss * static_cast<double>(end - start);
      correct += step.correct;
    }
    m.train_loss = loss_sum / static_cast<double>(order.size());
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    if (!split.val.empty()) m.val = evaluate(model, std::span<const GridSample>(split.val));
    if (options.evaluate_test && !split.test.empty()) {
      m.test = evaluate(model, std::span<const GridSample>(split.test));
    }
    history.push_back(m);
    if (options.on_epoch && !options.on_epoch(m)) break;
  }
  return history;
}

#define MANS_INSTANTIATE_MODEL(T)                                                               \
  template struct MansModel<T>;                                                                 \
  template std::size_t parameter_count<T>(const MansModel<T>&);                                 \
  template Tensor<T> mans_forward<T>(Tape<T>&, MansModel<T>&, const Tensor<T>&, Mode,           \
                                     std::vector<LayerTrace>*);                                 \
  template Batch<T> make_batch<T>(std::span<const GridSample>, std::span<const std::size_t>);   \
  template Batch<T> make_batch<T>(std::span<const GridSample>);                                 \
  template StepResult train_step<T>(MansModel<T>&, SgdState<T>&, const Batch<T>&);              \
  template EvalResult evaluate<T>(MansModel<T>&, std::span<const GridSample>, std::size_t);

MANS_INSTANTIATE_MODEL(float)
MANS_INSTANTIATE_MODEL(double)

#undef MANS_INSTANTIATE_MODEL

}  // namespace mans
