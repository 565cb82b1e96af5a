#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mans/recurrent.hpp"
#include "mans/tensor.hpp"

namespace mans::testing {

inline Tensor<double> randn(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  std::normal_distribution<double> d(0.0, scale);
  for (double& v : t.data()) v = d(rng);
  return t;
}

inline Tensor<double> leaf(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  auto t = randn(std::move(shape), rng, scale);
  t.set_requires_grad(true);
  return t;
}

/// Largest |a - n| / max(|a|, |n|, floor) between backward and central differences
/// over every entry of every input.
inline double fd_max_rel_error(const std::function<Tensor<double>(Tape<double>&)>& f,
                               std::vector<Tensor<double>> inputs, double h = 1e-5,
                               double floor = 1e-6) {
  for (auto& t : inputs) t.clear_grad();
  Tape<double> tape;
  auto y = f(tape);
  tape.backward(y);
  double worst = 0.0;
  for (auto& t : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t.data()[i];
      Tape<double> off(false);
      t.data()[i] = saved + h;
      const double up = f(off).item();
      t.data()[i] = saved - h;
      const double down = f(off).item();
      t.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// One GRU step for a single row, written out with scalar loops.
inline std::vector<double> gru_oracle(const GruParams<double>& p, const std::vector<double>& x,
                                      const std::vector<double>& h) {
  const std::size_t k = h.size();
  auto w = [](const Tensor<double>& m, std::size_t i, std::size_t j) { return m.raw()[i * m.dim(1) + j]; };
  auto b = [](const Tensor<double>& v, std::size_t j) { return v.raw()[j]; };
  auto sigm = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> z(k), r(k), out(k);
  for (std::size_t j = 0; j < k; ++j) {
    double az = b(p.bz, j), ar = b(p.br, j);
    for (std::size_t i = 0; i < k; ++i) {
      az += x[i] * w(p.wz, i, j) + h[i] * w(p.uz, i, j);
      ar += x[i] * w(p.wr, i, j) + h[i] * w(p.ur, i, j);
    }
    z[j] = sigm(az);
    r[j] = sigm(ar);
  }
  for (std::size_t j = 0; j < k; ++j) {
    double ac = b(p.bh, j);
    for (std::size_t i = 0; i < k; ++i) ac += x[i] * w(p.wh, i, j) + r[i] * h[i] * w(p.uh, i, j);
    out[j] = (1.0 - z[j]) * h[j] + z[j] * std::tanh(ac);
  }
  return out;
}

}  // namespace mans::testing
