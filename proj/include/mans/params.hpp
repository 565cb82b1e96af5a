#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mans/tensor.hpp"

namespace mans {

using Rng = std::mt19937_64;

template <typename T>
using NamedTensor = std::pair<std::string, Tensor<T>>;

template <typename T>
using NamedTensors = std::vector<NamedTensor<T>>;

/// Learnable tensor of `shape` drawn from uniform(-bound, bound).
template <typename T>
Tensor<T> uniform_parameter(Shape shape, double bound, Rng& rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& v : t.data()) v = static_cast<T>(dist(rng));
  t.set_requires_grad(true);
  return t;
}

/// Learnable tensor drawn from N(0, stddev^2).
template <typename T>
Tensor<T> normal_parameter(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (T& v : t.data()) v = static_cast<T>(dist(rng));
  t.set_requires_grad(true);
  return t;
}

template <typename T>
Tensor<T> constant_parameter(Shape shape, T value) {
  Tensor<T> t(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

}  // namespace mans
