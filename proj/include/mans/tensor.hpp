#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mans {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::string name;
};

/// Shared handle to a dense row-major array with an optional gradient buffer.
///
/// Copies alias the same storage; use `clone()` for a deep copy. Parameters are
/// tensors with `requires_grad` set; everything built from them on a recording
/// tape inherits the flag.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return storage_->shape.at(axis); }
  std::size_t numel() const { return storage_->value.size(); }

  std::span<T> data() { return storage_->value; }
  std::span<const T> data() const { return storage_->value; }
  T* raw() { return storage_->value.data(); }
  const T* raw() const { return storage_->value.data(); }
  T item() const;

  bool requires_grad() const { return storage_->requires_grad; }
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const { return !storage_->grad.empty(); }
  /// Gradient buffer, allocated (zeroed) on first access.
  std::span<T> grad();
  std::span<const T> grad() const { return storage_->grad; }
  void zero_grad();
  void clear_grad() { storage_->grad.clear(); }

  const std::string& name() const { return storage_->name; }
  Tensor& set_name(std::string name);

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

  TensorStorage<T>& storage() { return *storage_; }
  const TensorStorage<T>& storage() const { return *storage_; }

 private:
  std::shared_ptr<TensorStorage<T>> storage_;
};

/// One recorded operation.
template <typename T>
struct TapeNode {
  std::string op;
  std::vector<Tensor<T>> inputs;
  Tensor<T> output;
  std::function<void()> backward;
};

/// Test hook: scales the gradient that one operand of one op kind receives.
struct BackwardFault {
  std::string op;
  std::size_t operand = 0;
  double scale = 1.0;
};

/// Ordered record of the forward computation for reverse-mode differentiation.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  /// True when an op over `inputs` must be recorded.
  bool wants(std::initializer_list<const Tensor<T>*> inputs) const;

  void record(std::string op, std::vector<Tensor<T>> inputs, Tensor<T> output,
              std::function<void()> backward);

  const std::vector<TapeNode<T>>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  void inject_fault(BackwardFault fault) { fault_ = std::move(fault); }

  /// Seeds d(root)/d(root) = 1 and runs every node's rule once, newest first.
  void backward(Tensor<T>& root);

  /// Index of the first recorded node whose output holds a NaN or Inf.
  std::optional<std::size_t> first_non_finite() const;

 private:
  bool recording_;
  std::vector<TapeNode<T>> nodes_;
  std::optional<BackwardFault> fault_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mans
