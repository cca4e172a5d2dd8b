#include "txn/ops.hpp"

#include <algorithm>
#include <numeric>

#include "txn/error.hpp"
#include "txn/kernels.hpp"

namespace txn {
namespace {

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

template <typename T>
detail::TensorImpl<T>* raw(const Tensor<T>& t) {
  return t.impl().get();
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  auto* pa = raw(a);
  auto* pb = raw(b);
  return Tensor<T>::make_result(a.shape(), std::move(out), {a, b},
                                [pa, pb](std::span<const T> g) {
                                  for (auto* p : {pa, pb}) {
                                    auto slot = grad_slot(p);
                                    for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
                                  }
                                });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  auto* pa = raw(a);
  auto* pb = raw(b);
  return Tensor<T>::make_result(a.shape(), std::move(out), {a, b},
                                [pa, pb](std::span<const T> g) {
                                  auto ga = grad_slot(pa);
                                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                                  auto gb = grad_slot(pb);
                                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
                                });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<T> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  auto* pa = raw(a);
  auto* pb = raw(b);
  return Tensor<T>::make_result(a.shape(), std::move(out), {a, b},
                                [pa, pb](std::span<const T> g) {
                                  auto ga = grad_slot(pa);
                                  for (std::size_t i = 0; i < ga.size(); ++i) {
                                    ga[i] += g[i] * pb->data[i];
                                  }
                                  auto gb = grad_slot(pb);
                                  for (std::size_t i = 0; i < gb.size(); ++i) {
                                    gb[i] += g[i] * pa->data[i];
                                  }
                                });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T k) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= k;
  auto* pa = raw(a);
  return Tensor<T>::make_result(a.shape(), std::move(out), {a},
                                [pa, k](std::span<const T> g) {
                                  auto ga = grad_slot(pa);
                                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += k * g[i];
                                });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  const auto ad = a.data();
  const T total = std::accumulate(ad.begin(), ad.end(), T{0});
  auto* pa = raw(a);
  return Tensor<T>::make_result({}, {total}, {a}, [pa](std::span<const T> g) {
    auto ga = grad_slot(pa);
    for (auto& v : ga) v += g[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), T{1} / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const int m = static_cast<int>(a.dim(0));
  const int k = static_cast<int>(a.dim(1));
  const int n = static_cast<int>(b.dim(1));
  std::vector<T> out(static_cast<std::size_t>(m) * n);
  kernels::gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data(), false);
  auto* pa = raw(a);
  auto* pb = raw(b);
  return Tensor<T>::make_result({m, n}, std::move(out), {a, b},
                                [pa, pb, m, n, k](std::span<const T> g) {
                                  auto ga = grad_slot(pa);
                                  if (!ga.empty()) {
                                    // dA[M,K] += G[M,N] * B[K,N]^T
                                    std::vector<T> scratch(static_cast<std::size_t>(n) * k);
                                    kernels::gemm_nt(m, k, n, g.data(), pb->data.data(),
                                                     ga.data(), true, scratch.data());
                                  }
                                  auto gb = grad_slot(pb);
                                  if (!gb.empty()) {
                                    // dB[K,N] += A[M,K]^T * G[M,N]
                                    kernels::gemm_tn(k, n, m, pa->data.data(), g.data(),
                                                     gb.data(), true);
                                  }
                                });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose needs rank 2, got " + shape_string(a.shape()));
  const Index r = a.dim(0);
  const Index c = a.dim(1);
  const auto ad = a.data();
  std::vector<T> out(ad.size());
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) out[static_cast<std::size_t>(j * r + i)] = ad[static_cast<std::size_t>(i * c + j)];
  }
  auto* pa = raw(a);
  return Tensor<T>::make_result({c, r}, std::move(out), {a}, [pa, r, c](std::span<const T> g) {
    auto ga = grad_slot(pa);
    if (ga.empty()) return;
    for (Index i = 0; i < r; ++i) {
      for (Index j = 0; j < c; ++j) ga[static_cast<std::size_t>(i * c + j)] += g[static_cast<std::size_t>(j * r + i)];
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                     shape_string(shape));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  auto* pa = raw(a);
  return Tensor<T>::make_result(std::move(shape), std::move(out), {a},
                                [pa](std::span<const T> g) {
                                  auto ga = grad_slot(pa);
                                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                                });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, Index start, Index end) {
  const int r = a.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("slice: axis out of range for " + shape_string(a.shape()));
  }
  const Index extent = a.dim(axis);
  if (start < 0 || end > extent || start >= end) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(end) +
                     ") invalid for " + shape_string(a.shape()));
  }
  Index outer = 1;
  for (int i = 0; i < axis; ++i) outer *= a.dim(i);
  Index inner = 1;
  for (int i = axis + 1; i < r; ++i) inner *= a.dim(i);
  const Index len = end - start;
  Shape shape = a.shape();
  shape[static_cast<std::size_t>(axis)] = len;
  const auto ad = a.data();
  std::vector<T> out(static_cast<std::size_t>(outer * len * inner));
  for (Index o = 0; o < outer; ++o) {
    const auto src = ad.begin() + (o * extent + start) * inner;
    std::copy(src, src + len * inner, out.begin() + o * len * inner);
  }
  auto* pa = raw(a);
  return Tensor<T>::make_result(
      std::move(shape), std::move(out), {a}, [pa, outer, extent, start, len, inner](std::span<const T> g) {
        auto ga = grad_slot(pa);
        if (ga.empty()) return;
        for (Index o = 0; o < outer; ++o) {
          for (Index i = 0; i < len * inner; ++i) {
            ga[static_cast<std::size_t>((o * extent + start) * inner + i)] +=
                g[static_cast<std::size_t>(o * len * inner + i)];
          }
        }
      });
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& a, const Shape& shape) {
  const auto& src = a.shape();
  if (src.size() > shape.size()) {
    throw ShapeError("broadcast_to: cannot broadcast " + shape_string(src) + " to " +
                     shape_string(shape));
  }
  // Source strides aligned to the target rank; stride 0 marks a stretched axis.
  const std::size_t rank = shape.size();
  const std::size_t offset = rank - src.size();
  std::vector<Index> stride(rank, 0);
  Index s = 1;
  for (std::size_t i = src.size(); i-- > 0;) {
    const Index se = src[i];
    const Index te = shape[i + offset];
    if (se != te && se != 1) {
      throw ShapeError("broadcast_to: cannot broadcast " + shape_string(src) + " to " +
                       shape_string(shape));
    }
    stride[i + offset] = se == 1 ? 0 : s;
    s *= se;
  }
  const Index n = shape_numel(shape);
  std::vector<Index> map(static_cast<std::size_t>(n));
  std::vector<Index> counter(rank, 0);
  for (Index flat = 0; flat < n; ++flat) {
    Index idx = 0;
    for (std::size_t d = 0; d < rank; ++d) idx += counter[d] * stride[d];
    map[static_cast<std::size_t>(flat)] = idx;
    for (std::size_t d = rank; d-- > 0;) {
      if (++counter[d] < shape[d]) break;
      counter[d] = 0;
    }
  }
  const auto ad = a.data();
  std::vector<T> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[static_cast<std::size_t>(map[i])];
  auto* pa = raw(a);
  return Tensor<T>::make_result(shape, std::move(out), {a},
                                [pa, map = std::move(map)](std::span<const T> g) {
                                  auto ga = grad_slot(pa);
                                  if (ga.empty()) return;
                                  for (std::size_t i = 0; i < map.size(); ++i) {
                                    ga[static_cast<std::size_t>(map[i])] += g[i];
                                  }
                                });
}

template <typename T>
Tensor<T> concat_batch(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no tensors");
  const Shape& first = parts.front().shape();
  if (first.empty()) throw ShapeError("concat_batch: rank-0 tensors");
  Shape shape = first;
  shape[0] = 0;
  std::vector<T> out;
  std::vector<detail::TensorImpl<T>*> raws;
  for (const auto& p : parts) {
    if (p.rank() != static_cast<int>(first.size()) ||
        !std::equal(first.begin() + 1, first.end(), p.shape().begin() + 1)) {
      throw ShapeError("concat_batch: shape " + shape_string(p.shape()) + " does not match " +
                       shape_string(first));
    }
    shape[0] += p.dim(0);
    out.insert(out.end(), p.data().begin(), p.data().end());
    raws.push_back(raw(p));
  }
  return Tensor<T>::make_result(std::move(shape), std::move(out), parts,
                                [raws = std::move(raws)](std::span<const T> g) {
                                  std::size_t off = 0;
                                  for (auto* p : raws) {
                                    auto gp = grad_slot(p);
                                    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
                                    off += p->data.size();
                                  }
                                });
}

#define TXN_INSTANTIATE_OPS(T)                                                  \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                            \
  template Tensor<T> sum<T>(const Tensor<T>&);                                 \
  template Tensor<T> mean<T>(const Tensor<T>&);                                \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> transpose<T>(const Tensor<T>&);                           \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                      \
  template Tensor<T> slice<T>(const Tensor<T>&, int, Index, Index);            \
  template Tensor<T> broadcast_to<T>(const Tensor<T>&, const Shape&);          \
  template Tensor<T> concat_batch<T>(const std::vector<Tensor<T>>&);

TXN_INSTANTIATE_OPS(float)
TXN_INSTANTIATE_OPS(double)

#undef TXN_INSTANTIATE_OPS

}  // namespace txn
