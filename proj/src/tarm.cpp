#include "mans/tarm.hpp"

#include <algorithm>
#include <cmath>

#include "mans/errors.hpp"
#include "mans/ops.hpp"

namespace mans {

char coordinate_tag(Coordinate c) {
  switch (c) {
    case Coordinate::kX:
      return 'x';
    case Coordinate::kY:
      return 'y';
    case Coordinate::kZ:
      return 'z';
  }
  return '?';
}

std::size_t TarmShape::bottleneck() const {
  if (alpha == 0) throw ArgumentError("tarm: ratio factor alpha must be positive");
  return std::max<std::size_t>(1, frames / alpha);
}

namespace {

double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

template <typename T>
void require_plane(const TarmParams<T>& p, const Tensor<T>& x) {
  if (x.rank() != 2 || x.dim(0) != p.frames() || x.dim(1) != p.joints()) {
    throw DimensionError("tarm: expected a [" + std::to_string(p.frames()) + "x" +
                         std::to_string(p.joints()) + "] plane, got " + shape_string(x.shape()));
  }
}

}  // namespace

template <typename T>
TarmParams<T> TarmParams<T>::init(const TarmShape& s, Rng& rng) {
  const std::size_t m = s.bottleneck();
  TarmParams p;
  p.fc_in_w = uniform_parameter<T>(Shape{s.joints, s.hidden}, fan_in_bound(s.joints), rng);
  p.fc_in_b = uniform_parameter<T>(Shape{s.hidden}, fan_in_bound(s.joints), rng);
  p.bigru = BiGruParams<T>::uniform(s.hidden, rng);
  p.w1 = uniform_parameter<T>(Shape{m, s.frames}, fan_in_bound(s.frames), rng);
  if (s.attention_bias) p.b1 = uniform_parameter<T>(Shape{m, 1}, fan_in_bound(s.frames), rng);
  p.w2 = uniform_parameter<T>(Shape{s.frames, m}, fan_in_bound(m), rng);
  if (s.attention_bias) p.b2 = uniform_parameter<T>(Shape{s.frames, 1}, fan_in_bound(m), rng);
  p.fc_out_w = uniform_parameter<T>(Shape{s.hidden, s.joints}, fan_in_bound(s.hidden), rng);
  p.fc_out_b = uniform_parameter<T>(Shape{s.joints}, fan_in_bound(s.hidden), rng);
  return p;
}

template <typename T>
TarmParams<T> TarmParams<T>::zeros(const TarmShape& s) {
  const std::size_t m = s.bottleneck();
  TarmParams p;
  p.fc_in_w = constant_parameter<T>(Shape{s.joints, s.hidden}, T(0));
  p.fc_in_b = constant_parameter<T>(Shape{s.hidden}, T(0));
  p.bigru = BiGruParams<T>::zeros(s.hidden);
  p.w1 = constant_parameter<T>(Shape{m, s.frames}, T(0));
  if (s.attention_bias) p.b1 = constant_parameter<T>(Shape{m, 1}, T(0));
  p.w2 = constant_parameter<T>(Shape{s.frames, m}, T(0));
  if (s.attention_bias) p.b2 = constant_parameter<T>(Shape{s.frames, 1}, T(0));
  p.fc_out_w = constant_parameter<T>(Shape{s.hidden, s.joints}, T(0));
  p.fc_out_b = constant_parameter<T>(Shape{s.joints}, T(0));
  return p;
}

template <typename T>
void TarmParams<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + ".fc_in.w", fc_in_w);
  out.emplace_back(prefix + ".fc_in.b", fc_in_b);
  bigru.collect(prefix + ".bigru", out);
  out.emplace_back(prefix + ".w1.w", w1);
  if (b1.defined()) out.emplace_back(prefix + ".w1.b", b1);
  out.emplace_back(prefix + ".w2.w", w2);
  if (b2.defined()) out.emplace_back(prefix + ".w2.b", b2);
  out.emplace_back(prefix + ".fc_out.w", fc_out_w);
  out.emplace_back(prefix + ".fc_out.b", fc_out_b);
}

template <typename T>
TarmMemory<T> tarm_memory(Tape<T>& tape, const TarmParams<T>& p, const CoordMatrix<T>& x) {
  require_plane(p, x.values);
  auto resized = ops::affine(tape, x.values, p.fc_in_w, p.fc_in_b);
  auto memory = bigru_forward(tape, p.bigru, resized);
  return {memory, resized};
}

template <typename T>
Tensor<T> tarm_attention(Tape<T>& tape, const TarmParams<T>& p, const Tensor<T>& x_resized) {
  const std::size_t frames = p.frames();
  const std::size_t k = p.hidden();
  if (x_resized.rank() != 2 || x_resized.dim(0) != frames || x_resized.dim(1) != k) {
    throw DimensionError("tarm_attention: expected [" + std::to_string(frames) + "x" +
                         std::to_string(k) + "], got " + shape_string(x_resized.shape()));
  }
  using namespace ops;
  auto pooled = reshape(tape, reduce_mean(tape, x_resized, 1), Shape{frames, 1});
  auto repeated = duplicate_cols(tape, pooled, k);
  auto reduced = matmul(tape, p.w1, repeated);
  if (p.has_attention_bias()) reduced = add(tape, reduced, duplicate_cols(tape, p.b1, k));
  auto expanded = matmul(tape, p.w2, relu(tape, reduced));
  if (p.has_attention_bias()) expanded = add(tape, expanded, duplicate_cols(tape, p.b2, k));
  return sigmoid(tape, expanded);
}

template <typename T>
CoordMatrix<T> tarm_forward(Tape<T>& tape, const TarmParams<T>& p, const CoordMatrix<T>& x,
                            bool use_attention) {
  auto memory = tarm_memory(tape, p, x);
  Tensor<T> recalibrated = memory.f_m;
  if (use_attention) {
    recalibrated = ops::mul(tape, memory.f_m, tarm_attention(tape, p, memory.x_resized));
  }
  auto correction = ops::affine(tape, recalibrated, p.fc_out_w, p.fc_out_b);
  return {ops::add(tape, x.values, correction), x.coordinate};
}

template <typename T>
Tensor<T> tarm_forward_batch(Tape<T>& tape, const TarmParams<T>& p, const Tensor<T>& x,
                             bool use_attention) {
  const std::size_t frames = p.frames();
  const std::size_t joints = p.joints();
  const std::size_t k = p.hidden();
  if (x.rank() != 3 || x.dim(1) != frames || x.dim(2) != joints) {
    throw DimensionError("tarm: expected [B x " + std::to_string(frames) + " x " +
                         std::to_string(joints) + "] planes, got " + shape_string(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  using namespace ops;
  // [B x T x N] -> [B*T x K] -> [T x B x K]
  auto resized = affine(tape, reshape(tape, x, Shape{batch * frames, joints}), p.fc_in_w, p.fc_in_b);
  auto by_time = swap01(tape, reshape(tape, resized, Shape{batch, frames, k}));
  Tensor<T> recalibrated = bigru_forward(tape, p.bigru, by_time);
  if (use_attention) {
    // one column per sample instead of K identical ones
    auto pooled = swap01(tape, reduce_mean(tape, reshape(tape, resized, Shape{batch, frames, k}), 2));
    auto reduced = matmul(tape, p.w1, pooled);
    if (p.has_attention_bias()) reduced = add(tape, reduced, duplicate_cols(tape, p.b1, batch));
    auto expanded = matmul(tape, p.w2, relu(tape, reduced));
    if (p.has_attention_bias()) expanded = add(tape, expanded, duplicate_cols(tape, p.b2, batch));
    auto weights = duplicate_cols(tape, reshape(tape, sigmoid(tape, expanded), Shape{frames * batch, 1}), k);
    recalibrated = mul(tape, recalibrated, reshape(tape, weights, Shape{frames, batch, k}));
  }
  auto flat = reshape(tape, swap01(tape, recalibrated), Shape{batch * frames, k});
  auto correction = affine(tape, flat, p.fc_out_w, p.fc_out_b);
  return add(tape, x, reshape(tape, correction, x.shape()));
}

#define MANS_INSTANTIATE_TARM(T)                                                               \
  template struct TarmParams<T>;                                                               \
  template TarmMemory<T> tarm_memory<T>(Tape<T>&, const TarmParams<T>&, const CoordMatrix<T>&); \
  template Tensor<T> tarm_attention<T>(Tape<T>&, const TarmParams<T>&, const Tensor<T>&);      \
  template CoordMatrix<T> tarm_forward<T>(Tape<T>&, const TarmParams<T>&,                      \
                                          const CoordMatrix<T>&, bool);                        \
  template Tensor<T> tarm_forward_batch<T>(Tape<T>&, const TarmParams<T>&, const Tensor<T>&, bool);

MANS_INSTANTIATE_TARM(float)
MANS_INSTANTIATE_TARM(double)

#undef MANS_INSTANTIATE_TARM

}  // namespace mans
