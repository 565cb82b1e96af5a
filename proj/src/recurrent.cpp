#include "mans/recurrent.hpp"

#include <cmath>

#include "mans/errors.hpp"
#include "mans/ops.hpp"

namespace mans {

template <typename T>
GruParams<T> GruParams<T>::zeros(std::size_t k) {
  auto w = [k] { return constant_parameter<T>(Shape{k, k}, T(0)); };
  auto b = [k] { return constant_parameter<T>(Shape{k}, T(0)); };
  return {w(), w(), w(), w(), w(), w(), b(), b(), b()};
}

template <typename T>
GruParams<T> GruParams<T>::uniform(std::size_t k, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(k));
  GruParams p;
  p.wz = uniform_parameter<T>(Shape{k, k}, bound, rng);
  p.wr = uniform_parameter<T>(Shape{k, k}, bound, rng);
  p.wh = uniform_parameter<T>(Shape{k, k}, bound, rng);
  p.uz = uniform_parameter<T>(Shape{k, k}, bound, rng);
  p.ur = uniform_parameter<T>(Shape{k, k}, bound, rng);
  p.uh = uniform_parameter<T>(Shape{k, k}, bound, rng);
  p.bz = uniform_parameter<T>(Shape{k}, bound, rng);
  p.br = uniform_parameter<T>(Shape{k}, bound, rng);
  p.bh = uniform_parameter<T>(Shape{k}, bound, rng);
  return p;
}

template <typename T>
void GruParams<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + ".Wz", wz);
  out.emplace_back(prefix + ".Wr", wr);
  out.emplace_back(prefix + ".Wh", wh);
  out.emplace_back(prefix + ".Uz", uz);
  out.emplace_back(prefix + ".Ur", ur);
  out.emplace_back(prefix + ".Uh", uh);
  out.emplace_back(prefix + ".bz", bz);
  out.emplace_back(prefix + ".br", br);
  out.emplace_back(prefix + ".bh", bh);
}

template <typename T>
Tensor<T> gru_step(Tape<T>& tape, const GruParams<T>& p, const Tensor<T>& x_t,
                   const Tensor<T>& h_prev) {
  const std::size_t k = p.hidden();
  if (x_t.rank() != 2 || x_t.dim(1) != k || h_prev.shape() != x_t.shape()) {
    throw DimensionError("gru_step: input " + shape_string(x_t.shape()) + " and state " +
                         shape_string(h_prev.shape()) + " must both be [B x " +
                         std::to_string(k) + "]");
  }
  using namespace ops;
  auto z = sigmoid(tape, add(tape, affine(tape, x_t, p.wz, p.bz), matmul(tape, h_prev, p.uz)));
  auto r = sigmoid(tape, add(tape, affine(tape, x_t, p.wr, p.br), matmul(tape, h_prev, p.ur)));
  auto gated = mul(tape, r, h_prev);
  auto candidate =
      ops::tanh(tape, add(tape, affine(tape, x_t, p.wh, p.bh), matmul(tape, gated, p.uh)));
  // (1 - z) * h + z * c, written as h + z * (c - h).
  return add(tape, h_prev, mul(tape, z, sub(tape, candidate, h_prev)));
}

template <typename T>
Tensor<T> bigru_forward(Tape<T>& tape, const BiGruParams<T>& p, const Tensor<T>& x) {
  const std::size_t k = p.hidden();
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("bigru_forward: expected [T x K] or [T x B x K] input, got " +
                         shape_string(x.shape()));
  }
  const std::size_t steps = x.dim(0);
  if (steps == 0) throw ArgumentError("bigru_forward: sequence has no frames");
  if (x.shape().back() != k) {
    throw DimensionError("bigru_forward: input width " + std::to_string(x.shape().back()) +
                         " differs from hidden size " + std::to_string(k));
  }
  const std::size_t rows_per_step = x.rank() == 3 ? x.dim(1) : 1;
  std::vector<Tensor<T>> rows;
  rows.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    auto row = ops::select(tape, x, t);
    rows.push_back(x.rank() == 3 ? row : ops::reshape(tape, row, Shape{1, k}));
  }

  std::vector<Tensor<T>> fwd(steps);
  std::vector<Tensor<T>> bwd(steps);
  Tensor<T> h(Shape{rows_per_step, k});
  for (std::size_t t = 0; t < steps; ++t) {
    h = gru_step(tape, p.forward, rows[t], h);
    fwd[t] = h;
  }
  h = Tensor<T>(Shape{rows_per_step, k});
  for (std::size_t t = steps; t-- > 0;) {
    h = gru_step(tape, p.backward, rows[t], h);
    bwd[t] = h;
  }
  auto forward = ops::reshape(tape, ops::stack(tape, fwd), x.shape());
  auto backward = ops::reshape(tape, ops::stack(tape, bwd), x.shape());
  return ops::add(tape, forward, backward);
}

template struct GruParams<float>;
template struct GruParams<double>;
template Tensor<float> gru_step<float>(Tape<float>&, const GruParams<float>&,
                                       const Tensor<float>&, const Tensor<float>&);
template Tensor<double> gru_step<double>(Tape<double>&, const GruParams<double>&,
                                         const Tensor<double>&, const Tensor<double>&);
template Tensor<float> bigru_forward<float>(Tape<float>&, const BiGruParams<float>&,
                                            const Tensor<float>&);
template Tensor<double> bigru_forward<double>(Tape<double>&, const BiGruParams<double>&,
                                              const Tensor<double>&);

}  // namespace mans
