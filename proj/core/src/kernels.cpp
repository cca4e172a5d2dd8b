#include "txn/kernels.hpp"

#include <algorithm>
#include <vector>

namespace txn::kernels {
namespace {

constexpr int kColumnBlock = 256;

template <typename T>
void zero_rows(int m, int n, T* c) {
  std::fill(c, c + static_cast<std::int64_t>(m) * n, T{0});
}

// Maps output column w to its source column for a kernel tap at offset
// `shift`, or -1 when the tap falls into zero padding.
void tap_index(int w, int shift, Padding padding, std::vector<int>& idx) {
  idx.resize(static_cast<std::size_t>(w));
  for (int x = 0; x < w; ++x) {
    int s = x + shift;
    if (padding == Padding::kCircular) {
      s %= w;
      if (s < 0) s += w;
    } else if (s < 0 || s >= w) {
      s = -1;
    }
    idx[static_cast<std::size_t>(x)] = s;
  }
}

int wrap_row(int y, int h, Padding padding) {
  if (padding == Padding::kCircular) {
    y %= h;
    return y < 0 ? y + h : y;
  }
  return (y < 0 || y >= h) ? -1 : y;
}

}  // namespace

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) zero_rows(m, n, c);
  for (int j0 = 0; j0 < n; j0 += kColumnBlock) {
    const int jn = std::min(kColumnBlock, n - j0);
    int i = 0;
    for (; i + 4 <= m; i += 4) {
      T* c0 = c + static_cast<std::int64_t>(i) * n + j0;
      T* c1 = c0 + n;
      T* c2 = c1 + n;
      T* c3 = c2 + n;
      const T* a0 = a + static_cast<std::int64_t>(i) * k;
      const T* a1 = a0 + k;
      const T* a2 = a1 + k;
      const T* a3 = a2 + k;
      for (int p = 0; p < k; ++p) {
        const T* brow = b + static_cast<std::int64_t>(p) * n + j0;
        const T v0 = a0[p];
        const T v1 = a1[p];
        const T v2 = a2[p];
        const T v3 = a3[p];
        for (int j = 0; j < jn; ++j) {
          const T bv = brow[j];
          c0[j] += v0 * bv;
          c1[j] += v1 * bv;
          c2[j] += v2 * bv;
          c3[j] += v3 * bv;
        }
      }
    }
    for (; i < m; ++i) {
      T* crow = c + static_cast<std::int64_t>(i) * n + j0;
      const T* arow = a + static_cast<std::int64_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        const T* brow = b + static_cast<std::int64_t>(p) * n + j0;
        const T v = arow[p];
        for (int j = 0; j < jn; ++j) crow[j] += v * brow[j];
      }
    }
  }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) zero_rows(m, n, c);
  for (int j0 = 0; j0 < n; j0 += kColumnBlock) {
    const int jn = std::min(kColumnBlock, n - j0);
    for (int p = 0; p < k; ++p) {
      const T* arow = a + static_cast<std::int64_t>(p) * m;
      const T* brow = b + static_cast<std::int64_t>(p) * n + j0;
      for (int i = 0; i < m; ++i) {
        const T v = arow[i];
        T* crow = c + static_cast<std::int64_t>(i) * n + j0;
        for (int j = 0; j < jn; ++j) crow[j] += v * brow[j];
      }
    }
  }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate,
             T* scratch) {
  // Transpose B[N,K] into scratch[K,N] so the inner loop runs contiguously.
  for (int j = 0; j < n; ++j) {
    const T* brow = b + static_cast<std::int64_t>(j) * k;
    for (int p = 0; p < k; ++p) scratch[static_cast<std::int64_t>(p) * n + j] = brow[p];
  }
  gemm_nn(m, n, k, a, scratch, c, accumulate);
}

template <typename T>
void im2col(const T* image, int channels, int h, int w, int kh, int kw,
            Padding padding, T* cols) {
  const int ph = (kh - 1) / 2;
  const int pw = (kw - 1) / 2;
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  std::vector<int> idx;
  T* out = cols;
  for (int ch = 0; ch < channels; ++ch) {
    const T* src = image + ch * plane;
    for (int dy = 0; dy < kh; ++dy) {
      for (int dx = 0; dx < kw; ++dx) {
        tap_index(w, dx - pw, padding, idx);
        for (int y = 0; y < h; ++y) {
          const int sy = wrap_row(y + dy - ph, h, padding);
          if (sy < 0) {
            std::fill(out, out + w, T{0});
          } else {
            const T* srow = src + static_cast<std::int64_t>(sy) * w;
            for (int x = 0; x < w; ++x) {
              const int sx = idx[static_cast<std::size_t>(x)];
              out[x] = sx < 0 ? T{0} : srow[sx];
            }
          }
          out += w;
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, int channels, int h, int w, int kh, int kw,
            Padding padding, T* image) {
  const int ph = (kh - 1) / 2;
  const int pw = (kw - 1) / 2;
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  std::vector<int> idx;
  const T* in = cols;
  for (int ch = 0; ch < channels; ++ch) {
    T* dst = image + ch * plane;
    for (int dy = 0; dy < kh; ++dy) {
      for (int dx = 0; dx < kw; ++dx) {
        tap_index(w, dx - pw, padding, idx);
        for (int y = 0; y < h; ++y) {
          const int sy = wrap_row(y + dy - ph, h, padding);
          if (sy >= 0) {
            T* drow = dst + static_cast<std::int64_t>(sy) * w;
            for (int x = 0; x < w; ++x) {
              const int sx = idx[static_cast<std::size_t>(x)];
              if (sx >= 0) drow[sx] += in[x];
            }
          }
          in += w;
        }
      }
    }
  }
}

#define TXN_INSTANTIATE_KERNELS(T)                                                   \
  template void gemm_nn<T>(int, int, int, const T*, const T*, T*, bool);            \
  template void gemm_tn<T>(int, int, int, const T*, const T*, T*, bool);            \
  template void gemm_nt<T>(int, int, int, const T*, const T*, T*, bool, T*);        \
  template void im2col<T>(const T*, int, int, int, int, int, Padding, T*);          \
  template void col2im<T>(const T*, int, int, int, int, int, Padding, T*);

TXN_INSTANTIATE_KERNELS(float)
TXN_INSTANTIATE_KERNELS(double)

#undef TXN_INSTANTIATE_KERNELS

}  // namespace txn::kernels
