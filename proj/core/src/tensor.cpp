#include "txn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "txn/error.hpp"

namespace txn {
namespace {

thread_local bool t_grad_enabled = true;
std::atomic<bool> g_check_finite{false};
std::atomic<std::uint64_t> g_node_seq{0};

template <typename T>
void ensure_finite(std::span<const T> values) {
  for (const T v : values) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value produced by tensor op");
    }
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (const Index d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

void set_check_finite(bool on) { g_check_finite.store(on); }
bool check_finite_enabled() { return g_check_finite.load(); }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T{0}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const Index n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), value),
                   requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> data, bool requires_grad) {
  if (shape.size() > 4) {
    throw ShapeError("tensor rank above 4: " + shape_string(shape));
  }
  if (shape_numel(shape) != static_cast<Index>(data.size())) {
    throw ShapeError("shape " + shape_string(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  Tensor t(std::move(impl));
  t.set_requires_grad(requires_grad);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

template <typename T>
Index Tensor<T>::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(shape()));
  }
  return impl_->shape[static_cast<std::size_t>(axis)];
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!is_leaf()) throw Error("mutable_data() on a graph intermediate");
  return impl_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  }
  return impl_->data[0];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<Index> index) const {
  if (static_cast<int>(index.size()) != rank()) {
    throw ShapeError("index rank mismatch for shape " + shape_string(shape()));
  }
  Index flat = 0;
  std::size_t axis = 0;
  for (const Index i : index) {
    const Index extent = impl_->shape[axis++];
    if (i < 0 || i >= extent) throw ShapeError("index out of range");
    flat = flat * extent + i;
  }
  return impl_->data[static_cast<std::size_t>(flat)];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  if (!is_leaf() && !on) throw Error("cannot drop requires_grad on an intermediate");
  impl_->requires_grad = on;
  if (on && impl_->grad.size() != impl_->data.size()) {
    impl_->grad.assign(impl_->data.size(), T{0});
  }
  if (!on) impl_->grad.clear();
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), T{0});
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from_data(shape(), impl_->data);
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, std::vector<T> data,
                                 std::initializer_list<Tensor> inputs, BackwardFn backward) {
  return make_result(std::move(shape), std::move(data), std::vector<Tensor>(inputs),
                     std::move(backward));
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, std::vector<T> data,
                                 const std::vector<Tensor>& inputs, BackwardFn backward) {
  if (check_finite_enabled()) ensure_finite<T>(data);
  Tensor out = from_data(std::move(shape), std::move(data));
  if (!t_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<detail::Node<T>>();
  node->seq = g_node_seq.fetch_add(1);
  node->inputs.reserve(inputs.size());
  for (const auto& t : inputs) node->inputs.push_back(t.impl_);
  node->backward = std::move(backward);
  out.impl_->node = std::move(node);
  out.impl_->requires_grad = true;
  return out;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  using Impl = detail::TensorImpl<T>;
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  std::vector<Impl*> interior;
  std::vector<Impl*> stack{loss.impl().get()};
  std::unordered_set<Impl*> seen{loss.impl().get()};
  while (!stack.empty()) {
    Impl* cur = stack.back();
    stack.pop_back();
    if (cur->node == nullptr) continue;
    interior.push_back(cur);
    for (const auto& in : cur->node->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  std::sort(interior.begin(), interior.end(),
            [](const Impl* a, const Impl* b) { return a->node->seq > b->node->seq; });

  for (Impl* impl : interior) impl->grad.assign(impl->data.size(), T{0});
  loss.impl()->grad[0] += T{1};
  for (Impl* impl : interior) impl->node->backward(impl->grad);
  for (Impl* impl : interior) {
    impl->grad.clear();
    impl->grad.shrink_to_fit();
  }
}

template <typename T>
void zero_grad(std::span<Tensor<T>> params) {
  for (auto& p : params) p.zero_grad();
}

template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);
template void zero_grad<float>(std::span<Tensor<float>>);
template void zero_grad<double>(std::span<Tensor<double>>);

}  // namespace txn
