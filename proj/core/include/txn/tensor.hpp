#pragma once

// Dense tensors with a define-by-run reverse-mode autodiff graph.
//
// A Tensor is a shared handle to an immutable value plus an optional
// gradient slot. Ops that see at least one input with requires_grad append
// a node to the graph; backward() walks the reachable nodes once each, in
// reverse creation order, and accumulates into leaf gradients.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace txn {

using Index = std::int64_t;
using Shape = std::vector<Index>;

std::string shape_string(const Shape& shape);
Index shape_numel(const Shape& shape);

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
struct Node {
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  // Receives the gradient of the node's output and accumulates into the
  // gradient slots of the inputs that require it.
  std::function<void(std::span<const T>)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::shared_ptr<Node<T>> node;
};

}  // namespace detail

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Debug toggle: every op checks its output for NaN/Inf and throws
/// NumericError. Off by default.
void set_check_finite(bool on);
bool check_finite_enabled();

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  Index dim(int axis) const;
  Index numel() const { return static_cast<Index>(impl_->data.size()); }

  std::span<const T> data() const { return impl_->data; }
  /// Writable view of the values. Only valid on leaves (parameters, inputs);
  /// graph intermediates are immutable.
  std::span<T> mutable_data();
  T item() const;
  T at(std::initializer_list<Index> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on);
  bool is_leaf() const { return impl_->node == nullptr; }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return impl_->grad; }
  void zero_grad();

  /// Copy of the values with no graph history.
  Tensor detach() const;
  /// Values converted to another precision, no graph history.
  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(impl_->data.begin(), impl_->data.end());
    return Tensor<U>::from_data(shape(), std::move(out));
  }

  /// True when both handles refer to the same storage.
  bool same(const Tensor& other) const { return impl_ == other.impl_; }

  // Op-authoring surface (used by ops/layers; not for general callers).
  using Impl = detail::TensorImpl<T>;
  using BackwardFn = std::function<void(std::span<const T>)>;
  const std::shared_ptr<Impl>& impl() const { return impl_; }
  /// Builds an op result. When recording is enabled and any input requires
  /// a gradient, a graph node holding `backward` is attached.
  static Tensor make_result(Shape shape, std::vector<T> data,
                            std::initializer_list<Tensor> inputs, BackwardFn backward);
  static Tensor make_result(Shape shape, std::vector<T> data,
                            const std::vector<Tensor>& inputs, BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<Impl> impl_;
};

/// Gradient slot of an op input inside a backward closure; empty when the
/// input does not take gradients.
template <typename T>
std::span<T> grad_slot(detail::TensorImpl<T>* impl) {
  if (impl == nullptr || !impl->requires_grad) return {};
  return impl->grad;
}

/// Accumulates d(loss)/d(leaf) into every reachable leaf that requires grad.
/// The loss must hold exactly one element.
template <typename T>
void backward(const Tensor<T>& loss);

template <typename T>
void zero_grad(std::span<Tensor<T>> params);

template <typename T>
void zero_grad(std::vector<Tensor<T>>& params) {
  zero_grad(std::span<Tensor<T>>(params));
}

}  // namespace txn
