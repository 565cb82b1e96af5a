#include "mans/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mans/errors.hpp"

namespace mans {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor shape " + shape_string(shape) + " has a zero axis");
  }
}

template <typename T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : storage_(std::make_shared<TensorStorage<T>>()) {
  check_shape(shape);
  storage_->value.assign(shape_numel(shape), fill);
  storage_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : storage_(std::make_shared<TensorStorage<T>>()) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  storage_->shape = std::move(shape);
  storage_->value = std::move(values);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ArgumentError("item() on tensor of shape " + shape_string(shape()));
  return storage_->value[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
  storage_->requires_grad = flag;
  return *this;
}

template <typename T>
std::span<T> Tensor<T>::grad() {
  if (storage_->grad.empty()) storage_->grad.assign(storage_->value.size(), T(0));
  return storage_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (!storage_->grad.empty()) std::fill(storage_->grad.begin(), storage_->grad.end(), T(0));
}

template <typename T>
Tensor<T>& Tensor<T>::set_name(std::string name) {
  storage_->name = std::move(name);
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor<T> copy(storage_->shape, storage_->value);
  copy.storage_->requires_grad = storage_->requires_grad;
  copy.storage_->name = storage_->name;
  return copy;
}

template <typename T>
bool Tape<T>::wants(std::initializer_list<const Tensor<T>*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor<T>* t) { return t != nullptr && t->requires_grad(); });
}

template <typename T>
void Tape<T>::record(std::string op, std::vector<Tensor<T>> inputs, Tensor<T> output,
                     std::function<void()> backward) {
#ifndef NDEBUG
  const bool finite_inputs = std::all_of(inputs.begin(), inputs.end(), [](const Tensor<T>& t) {
    return all_finite<T>(t.data());
  });
  if (finite_inputs && !all_finite<T>(output.data())) {
    throw NumericalError(op + " produced a non-finite value from finite inputs");
  }
#endif
  output.set_requires_grad(true);
  nodes_.push_back({std::move(op), std::move(inputs), std::move(output), std::move(backward)});
}

template <typename T>
void Tape<T>::backward(Tensor<T>& root) {
  if (!root.defined() || root.numel() != 1) {
    throw ArgumentError("backward needs a scalar root, got shape " +
                        (root.defined() ? shape_string(root.shape()) : std::string("<undefined>")));
  }
  const bool on_tape = std::any_of(nodes_.begin(), nodes_.end(), [&](const TapeNode<T>& n) {
    return n.output.same_storage(root);
  });
  if (!on_tape && !root.requires_grad()) {
    throw ArgumentError("backward root is neither on the tape nor a gradient-tracking leaf");
  }
  root.grad()[0] += T(1);

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    TapeNode<T>& node = *it;
    if (!node.output.has_grad()) continue;
    const bool faulty = fault_ && fault_->op == node.op && fault_->operand < node.inputs.size() &&
                        node.inputs[fault_->operand].requires_grad();
    if (!faulty) {
      node.backward();
      continue;
    }
    Tensor<T>& target = node.inputs[fault_->operand];
    std::vector<T> before(target.grad().begin(), target.grad().end());
    node.backward();
    auto after = target.grad();
    const T scale = static_cast<T>(fault_->scale);
    for (std::size_t i = 0; i < after.size(); ++i) {
      after[i] = before[i] + scale * (after[i] - before[i]);
    }
  }
}

template <typename T>
std::optional<std::size_t> Tape<T>::first_non_finite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!all_finite<T>(nodes_[i].output.data())) return i;
  }
  return std::nullopt;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace mans
