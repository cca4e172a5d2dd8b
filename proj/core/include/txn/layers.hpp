#pragma once

// Differentiable network layers over [batch, channel, height, width] tensors.

#include <cstdint>
#include <vector>

#include "txn/kernels.hpp"
#include "txn/tensor.hpp"

namespace txn {

using PaddingMode = kernels::Padding;

/// Stride-1 "same" convolution: weight [out, in, kh, kw], bias [out].
/// Kernel extents must be odd.
template <typename T>
struct ConvSpec {
  Tensor<T> weight;
  Tensor<T> bias;
  PaddingMode padding = PaddingMode::kZero;

  static ConvSpec zeros(int in_channels, int out_channels, int kh, int kw,
                        PaddingMode padding, bool trainable);

  int in_channels() const { return static_cast<int>(weight.dim(1)); }
  int out_channels() const { return static_cast<int>(weight.dim(0)); }
  int kernel_h() const { return static_cast<int>(weight.dim(2)); }
  int kernel_w() const { return static_cast<int>(weight.dim(3)); }
  /// Throws ShapeError if weight/bias shapes disagree or a kernel extent is even.
  void validate() const;
};

template <typename T>
struct BatchNormState {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);
  bool training = true;

  /// gamma = 1, beta = 0, running mean 0, running variance 1.
  static BatchNormState identity(int channels, bool trainable);
  int channels() const { return static_cast<int>(gamma.numel()); }
};

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvSpec<T>& spec);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Training mode normalizes with batch statistics over (B, H, W) and
/// updates the running statistics (unbiased variance); eval mode uses the
/// running statistics.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, BatchNormState<T>& state);

/// Nearest-neighbour upsampling; only factor 2 is supported.
template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int factor = 2);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

enum class PoolKind : std::uint8_t { kAverage, kMax };

/// 2x2 window, stride 2. Max pooling routes gradient to the first maximum.
template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, int window = 2, int stride = 2);

/// Average-pooled pyramid: element i has extent H/2^i; element 0 is y.
template <typename T>
std::vector<Tensor<T>> downsample_image(const Tensor<T>& y, int levels);

}  // namespace txn
