#pragma once

// Dense row-major compute kernels behind the differentiable ops.
//
// Every kernel accumulates each output element over the reduction index in
// ascending order, independent of the element's position. Circular
// convolution relies on this for bit-exact shift equivariance.

#include <cstdint>
#include <span>

namespace txn::kernels {

enum class Padding : std::uint8_t { kZero, kCircular };

/// C[M,N] (+)= A[M,K] * B[K,N]
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate);

/// C[M,N] (+)= A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate);

/// C[M,N] (+)= A[M,K] * B[N,K]^T. scratch must hold k*n elements.
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate,
             T* scratch);

/// Gathers the (channels*kh*kw) x (h*w) patch matrix of one image.
template <typename T>
void im2col(const T* image, int channels, int h, int w, int kh, int kw,
            Padding padding, T* cols);

/// Scatter-adds a patch-matrix gradient back onto an image gradient.
template <typename T>
void col2im(const T* cols, int channels, int h, int w, int kh, int kw,
            Padding padding, T* image);

}  // namespace txn::kernels
