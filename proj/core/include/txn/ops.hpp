#pragma once

// Differentiable elementwise, reduction and shape ops.
//
// Binary elementwise ops require identical shapes; use broadcast_to to
// expand an operand first. Shape violations throw ShapeError naming both
// shapes.

#include <vector>

#include "txn/tensor.hpp"

namespace txn {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T k);

/// Sum of all elements, as a rank-0 tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);

/// [M,K] x [K,N] -> [M,N]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// Rank-2 transpose.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

/// Elements [start, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, Index start, Index end);

/// Numpy-style expansion: trailing axes aligned, extent-1 axes stretched.
template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& a, const Shape& shape);

/// Concatenates tensors of equal trailing shape along axis 0.
template <typename T>
Tensor<T> concat_batch(const std::vector<Tensor<T>>& parts);

}  // namespace txn
