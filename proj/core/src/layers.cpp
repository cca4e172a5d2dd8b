#include "txn/layers.hpp"

#include <cmath>
#include <string>

#include "txn/error.hpp"
#include "txn/parallel.hpp"

namespace txn {
namespace {

template <typename T>
void require_rank4(const char* op, const Tensor<T>& x) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected [B,C,H,W], got " + shape_string(x.shape()));
  }
}

struct Dims {
  int b, c, h, w;
};

template <typename T>
Dims dims_of(const Tensor<T>& x) {
  return {static_cast<int>(x.dim(0)), static_cast<int>(x.dim(1)), static_cast<int>(x.dim(2)),
          static_cast<int>(x.dim(3))};
}

}  // namespace

template <typename T>
ConvSpec<T> ConvSpec<T>::zeros(int in_channels, int out_channels, int kh, int kw,
                               PaddingMode padding, bool trainable) {
  ConvSpec spec;
  spec.weight = Tensor<T>::zeros({out_channels, in_channels, kh, kw}, trainable);
  spec.bias = Tensor<T>::zeros({out_channels}, trainable);
  spec.padding = padding;
  spec.validate();
  return spec;
}

template <typename T>
void ConvSpec<T>::validate() const {
  if (!weight.defined() || weight.rank() != 4) {
    throw ShapeError("conv weight must be [out,in,kh,kw]");
  }
  if (weight.dim(2) % 2 == 0 || weight.dim(3) % 2 == 0) {
    throw ShapeError("conv kernel extents must be odd, got " + shape_string(weight.shape()));
  }
  if (!bias.defined() || bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv bias " + (bias.defined() ? shape_string(bias.shape()) : "[]") +
                     " does not match weight " + shape_string(weight.shape()));
  }
}

template <typename T>
BatchNormState<T> BatchNormState<T>::identity(int channels, bool trainable) {
  BatchNormState s;
  s.gamma = Tensor<T>::full({channels}, T{1}, trainable);
  s.beta = Tensor<T>::zeros({channels}, trainable);
  s.running_mean = Tensor<T>::zeros({channels});
  s.running_var = Tensor<T>::full({channels}, T{1});
  return s;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvSpec<T>& spec) {
  require_rank4("conv2d", x);
  spec.validate();
  const auto [nb, c, h, w] = dims_of(x);
  if (c != spec.in_channels()) {
    throw ShapeError("conv2d: input " + shape_string(x.shape()) + " does not match weight " +
                     shape_string(spec.weight.shape()));
  }
  const int out_c = spec.out_channels();
  const int kh = spec.kernel_h();
  const int kw = spec.kernel_w();
  const bool pointwise = kh == 1 && kw == 1;
  const int patch = c * kh * kw;
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  const int n = static_cast<int>(hw);

  const bool record = grad_enabled() &&
                      (x.requires_grad() || spec.weight.requires_grad() || spec.bias.requires_grad());
  const bool keep_cols = record && spec.weight.requires_grad() && !pointwise;

  const T* xd = x.data().data();
  const T* wd = spec.weight.data().data();
  const T* bd = spec.bias.data().data();
  std::vector<T> out(static_cast<std::size_t>(nb) * out_c * hw);
  std::vector<std::vector<T>> saved_cols(keep_cols ? static_cast<std::size_t>(nb) : 0);

  parallel_for(static_cast<std::size_t>(nb), [&](std::size_t b) {
    const T* xb = xd + static_cast<std::int64_t>(b) * c * hw;
    T* ob = out.data() + static_cast<std::int64_t>(b) * out_c * hw;
    for (int o = 0; o < out_c; ++o) std::fill(ob + o * hw, ob + (o + 1) * hw, bd[o]);
    if (pointwise) {
      kernels::gemm_nn(out_c, n, patch, wd, xb, ob, true);
      return;
    }
    std::vector<T> cols(static_cast<std::size_t>(patch) * hw);
    kernels::im2col(xb, c, h, w, kh, kw, spec.padding, cols.data());
    kernels::gemm_nn(out_c, n, patch, wd, cols.data(), ob, true);
    if (keep_cols) saved_cols[b] = std::move(cols);
  });

  auto* px = x.impl().get();
  auto* pw = spec.weight.impl().get();
  auto* pbias = spec.bias.impl().get();
  const PaddingMode padding = spec.padding;
  return Tensor<T>::make_result(
      {nb, out_c, h, w}, std::move(out), {x, spec.weight, spec.bias},
      [=, saved = std::move(saved_cols)](std::span<const T> g) {
        auto gx = grad_slot(px);
        auto gw = grad_slot(pw);
        auto gbias = grad_slot(pbias);
        const T* gd = g.data();
        if (!gbias.empty()) {
          for (int b = 0; b < nb; ++b) {
            for (int o = 0; o < out_c; ++o) {
              const T* row = gd + (static_cast<std::int64_t>(b) * out_c + o) * hw;
              T acc{0};
              for (std::int64_t p = 0; p < hw; ++p) acc += row[p];
              gbias[static_cast<std::size_t>(o)] += acc;
            }
          }
        }
        const std::size_t wsize = static_cast<std::size_t>(out_c) * patch;
        std::vector<std::vector<T>> partial(gw.empty() ? 0 : static_cast<std::size_t>(nb));
        parallel_for(static_cast<std::size_t>(nb), [&](std::size_t b) {
          const T* gb = gd + static_cast<std::int64_t>(b) * out_c * hw;
          if (!gw.empty()) {
            partial[b].assign(wsize, T{0});
            const T* cols = pointwise ? px->data.data() + static_cast<std::int64_t>(b) * c * hw
                                      : saved[b].data();
            std::vector<T> scratch(static_cast<std::size_t>(patch) * hw);
            kernels::gemm_nt(out_c, patch, n, gb, cols, partial[b].data(), false, scratch.data());
          }
          if (!gx.empty()) {
            T* gxb = gx.data() + static_cast<std::int64_t>(b) * c * hw;
            if (pointwise) {
              kernels::gemm_tn(patch, n, out_c, pw->data.data(), gb, gxb, true);
            } else {
              std::vector<T> dcols(static_cast<std::size_t>(patch) * hw);
              kernels::gemm_tn(patch, n, out_c, pw->data.data(), gb, dcols.data(), false);
              kernels::col2im(dcols.data(), c, h, w, kh, kw, padding, gxb);
            }
          }
        });
        for (const auto& p : partial) {
          for (std::size_t i = 0; i < wsize; ++i) gw[i] += p[i];
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  const auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] < T{0} ? T{0} : xd[i];
  auto* px = x.impl().get();
  return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [px](std::span<const T> g) {
    auto gx = grad_slot(px);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (px->data[i] > T{0}) gx[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, BatchNormState<T>& state) {
  require_rank4("batch_norm", x);
  const auto [nb, c, h, w] = dims_of(x);
  if (c != state.channels()) {
    throw ShapeError("batch_norm: input " + shape_string(x.shape()) + " vs " +
                     std::to_string(state.channels()) + " channels");
  }
  if (!(state.eps > T{0})) throw ConfigError("batch_norm: eps must be positive");
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  const std::int64_t count = nb * hw;
  if (state.training && count < 2) {
    throw ShapeError("batch_norm: training mode needs at least 2 values per channel, got " +
                     shape_string(x.shape()));
  }
  const auto xd = x.data();
  const auto gamma = state.gamma.data();
  const auto beta = state.beta.data();
  std::vector<T> xhat(xd.size());
  std::vector<T> invstd(static_cast<std::size_t>(c));
  std::vector<T> out(xd.size());

  auto plane = [&](int b, int ch) { return (static_cast<std::int64_t>(b) * c + ch) * hw; };

  if (state.training) {
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    for (int ch = 0; ch < c; ++ch) {
      T mean{0};
      for (int b = 0; b < nb; ++b) {
        for (std::int64_t p = 0; p < hw; ++p) mean += xd[static_cast<std::size_t>(plane(b, ch) + p)];
      }
      mean /= static_cast<T>(count);
      T var{0};
      for (int b = 0; b < nb; ++b) {
        for (std::int64_t p = 0; p < hw; ++p) {
          const T d = xd[static_cast<std::size_t>(plane(b, ch) + p)] - mean;
          var += d * d;
        }
      }
      const T biased = var / static_cast<T>(count);
      const T unbiased = var / static_cast<T>(count - 1);
      invstd[static_cast<std::size_t>(ch)] = T{1} / std::sqrt(biased + state.eps);
      const auto i = static_cast<std::size_t>(ch);
      rm[i] = (T{1} - state.momentum) * rm[i] + state.momentum * mean;
      rv[i] = (T{1} - state.momentum) * rv[i] + state.momentum * unbiased;
      for (int b = 0; b < nb; ++b) {
        for (std::int64_t p = 0; p < hw; ++p) {
          const auto k = static_cast<std::size_t>(plane(b, ch) + p);
          xhat[k] = (xd[k] - mean) * invstd[i];
        }
      }
    }
  } else {
    const auto rm = state.running_mean.data();
    const auto rv = state.running_var.data();
    for (int ch = 0; ch < c; ++ch) {
      const auto i = static_cast<std::size_t>(ch);
      invstd[i] = T{1} / std::sqrt(rv[i] + state.eps);
      for (int b = 0; b < nb; ++b) {
        for (std::int64_t p = 0; p < hw; ++p) {
          const auto k = static_cast<std::size_t>(plane(b, ch) + p);
          xhat[k] = (xd[k] - rm[i]) * invstd[i];
        }
      }
    }
  }
  for (int ch = 0; ch < c; ++ch) {
    const auto i = static_cast<std::size_t>(ch);
    for (int b = 0; b < nb; ++b) {
      for (std::int64_t p = 0; p < hw; ++p) {
        const auto k = static_cast<std::size_t>(plane(b, ch) + p);
        out[k] = gamma[i] * xhat[k] + beta[i];
      }
    }
  }

  auto* px = x.impl().get();
  auto* pg = state.gamma.impl().get();
  auto* pb = state.beta.impl().get();
  const bool training = state.training;
  return Tensor<T>::make_result(
      x.shape(), std::move(out), {x, state.gamma, state.beta},
      [=, xhat = std::move(xhat), invstd = std::move(invstd)](std::span<const T> g) {
        auto gx = grad_slot(px);
        auto gg = grad_slot(pg);
        auto gbeta = grad_slot(pb);
        for (int ch = 0; ch < c; ++ch) {
          const auto i = static_cast<std::size_t>(ch);
          T sum_g{0};
          T sum_gx{0};
          for (int b = 0; b < nb; ++b) {
            const std::int64_t base = (static_cast<std::int64_t>(b) * c + ch) * hw;
            for (std::int64_t p = 0; p < hw; ++p) {
              const auto k = static_cast<std::size_t>(base + p);
              sum_g += g[k];
              sum_gx += g[k] * xhat[k];
            }
          }
          if (!gg.empty()) gg[i] += sum_gx;
          if (!gbeta.empty()) gbeta[i] += sum_g;
          if (gx.empty()) continue;
          const T gam = pg->data[i];
          const T n = static_cast<T>(count);
          for (int b = 0; b < nb; ++b) {
            const std::int64_t base = (static_cast<std::int64_t>(b) * c + ch) * hw;
            for (std::int64_t p = 0; p < hw; ++p) {
              const auto k = static_cast<std::size_t>(base + p);
              if (training) {
                gx[k] += gam * invstd[i] * (g[k] - sum_g / n - xhat[k] * sum_gx / n);
              } else {
                gx[k] += gam * invstd[i] * g[k];
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int factor) {
  require_rank4("upsample_nearest", x);
  if (factor != 2) throw ShapeError("upsample_nearest: only factor 2 is supported");
  const auto [nb, c, h, w] = dims_of(x);
  const int oh = 2 * h;
  const int ow = 2 * w;
  const auto xd = x.data();
  std::vector<T> out(xd.size() * 4);
  const std::int64_t planes = static_cast<std::int64_t>(nb) * c;
  for (std::int64_t pl = 0; pl < planes; ++pl) {
    const T* src = xd.data() + pl * h * w;
    T* dst = out.data() + pl * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) dst[y * ow + xx] = src[(y / 2) * w + xx / 2];
    }
  }
  auto* px = x.impl().get();
  return Tensor<T>::make_result(
      {nb, c, oh, ow}, std::move(out), {x}, [=](std::span<const T> g) {
        auto gx = grad_slot(px);
        if (gx.empty()) return;
        for (std::int64_t pl = 0; pl < planes; ++pl) {
          T* dst = gx.data() + pl * h * w;
          const T* src = g.data() + pl * oh * ow;
          for (int y = 0; y < oh; ++y) {
            for (int xx = 0; xx < ow; ++xx) dst[(y / 2) * w + xx / 2] += src[y * ow + xx];
          }
        }
      });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank4("concat_channels", a);
  require_rank4("concat_channels", b);
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: mismatched " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const Index nb = a.dim(0);
  const Index ca = a.dim(1);
  const Index cb = b.dim(1);
  const Index hw = a.dim(2) * a.dim(3);
  std::vector<T> out(static_cast<std::size_t>(nb * (ca + cb) * hw));
  const auto ad = a.data();
  const auto bd = b.data();
  for (Index i = 0; i < nb; ++i) {
    std::copy_n(ad.begin() + i * ca * hw, ca * hw, out.begin() + i * (ca + cb) * hw);
    std::copy_n(bd.begin() + i * cb * hw, cb * hw, out.begin() + (i * (ca + cb) + ca) * hw);
  }
  auto* pa = a.impl().get();
  auto* pb = b.impl().get();
  return Tensor<T>::make_result(
      {nb, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b}, [=](std::span<const T> g) {
        auto ga = grad_slot(pa);
        auto gb = grad_slot(pb);
        for (Index i = 0; i < nb; ++i) {
          if (!ga.empty()) {
            for (Index k = 0; k < ca * hw; ++k) {
              ga[static_cast<std::size_t>(i * ca * hw + k)] +=
                  g[static_cast<std::size_t>(i * (ca + cb) * hw + k)];
            }
          }
          if (!gb.empty()) {
            for (Index k = 0; k < cb * hw; ++k) {
              gb[static_cast<std::size_t>(i * cb * hw + k)] +=
                  g[static_cast<std::size_t>((i * (ca + cb) + ca) * hw + k)];
            }
          }
        }
      });
}

template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, int window, int stride) {
  require_rank4("pool2d", x);
  if (window != stride || window < 1) {
    throw ShapeError("pool2d: window and stride must be equal and positive");
  }
  const auto [nb, c, h, w] = dims_of(x);
  if (h % window != 0 || w % window != 0) {
    throw ShapeError("pool2d: extents of " + shape_string(x.shape()) +
                     " not divisible by window " + std::to_string(window));
  }
  const int oh = h / window;
  const int ow = w / window;
  const std::int64_t planes = static_cast<std::int64_t>(nb) * c;
  const auto xd = x.data();
  std::vector<T> out(static_cast<std::size_t>(planes * oh * ow));
  std::vector<std::int64_t> argmax(kind == PoolKind::kMax ? out.size() : 0);
  const T inv_area = T{1} / static_cast<T>(window * window);
  for (std::int64_t pl = 0; pl < planes; ++pl) {
    const std::int64_t in_base = pl * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        const auto o = static_cast<std::size_t>((pl * oh + y) * ow + xx);
        if (kind == PoolKind::kAverage) {
          T acc{0};
          for (int dy = 0; dy < window; ++dy) {
            for (int dx = 0; dx < window; ++dx) {
              acc += xd[static_cast<std::size_t>(in_base + (y * window + dy) * w + xx * window + dx)];
            }
          }
          out[o] = acc * inv_area;
        } else {
          std::int64_t best = in_base + (y * window) * w + xx * window;
          for (int dy = 0; dy < window; ++dy) {
            for (int dx = 0; dx < window; ++dx) {
              const std::int64_t k = in_base + (y * window + dy) * w + xx * window + dx;
              if (xd[static_cast<std::size_t>(k)] > xd[static_cast<std::size_t>(best)]) best = k;
            }
          }
          argmax[o] = best;
          out[o] = xd[static_cast<std::size_t>(best)];
        }
      }
    }
  }
  auto* px = x.impl().get();
  return Tensor<T>::make_result(
      {nb, c, oh, ow}, std::move(out), {x},
      [=, argmax = std::move(argmax)](std::span<const T> g) {
        auto gx = grad_slot(px);
        if (gx.empty()) return;
        if (kind == PoolKind::kMax) {
          for (std::size_t o = 0; o < argmax.size(); ++o) gx[static_cast<std::size_t>(argmax[o])] += g[o];
          return;
        }
        for (std::int64_t pl = 0; pl < planes; ++pl) {
          const std::int64_t in_base = pl * h * w;
          for (int y = 0; y < oh; ++y) {
            for (int xx = 0; xx < ow; ++xx) {
              const T v = g[static_cast<std::size_t>((pl * oh + y) * ow + xx)] * inv_area;
              for (int dy = 0; dy < window; ++dy) {
                for (int dx = 0; dx < window; ++dx) {
                  gx[static_cast<std::size_t>(in_base + (y * window + dy) * w + xx * window + dx)] += v;
                }
              }
            }
          }
        }
      });
}

template <typename T>
std::vector<Tensor<T>> downsample_image(const Tensor<T>& y, int levels) {
  require_rank4("downsample_image", y);
  if (levels < 0) throw ShapeError("downsample_image: negative level count");
  const Index div = Index{1} << levels;
  if (y.dim(2) % div != 0 || y.dim(3) % div != 0) {
    throw ShapeError("downsample_image: extents of " + shape_string(y.shape()) +
                     " not divisible by 2^" + std::to_string(levels));
  }
  std::vector<Tensor<T>> pyramid{y};
  for (int i = 0; i < levels; ++i) {
    pyramid.push_back(pool2d(pyramid.back(), PoolKind::kAverage, 2, 2));
  }
  return pyramid;
}

#define TXN_INSTANTIATE_LAYERS(T)                                                 \
  template struct ConvSpec<T>;                                                    \
  template struct BatchNormState<T>;                                              \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const ConvSpec<T>&);             \
  template Tensor<T> relu<T>(const Tensor<T>&);                                   \
  template Tensor<T> batch_norm<T>(const Tensor<T>&, BatchNormState<T>&);         \
  template Tensor<T> upsample_nearest<T>(const Tensor<T>&, int);                  \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> pool2d<T>(const Tensor<T>&, PoolKind, int, int);             \
  template std::vector<Tensor<T>> downsample_image<T>(const Tensor<T>&, int);

TXN_INSTANTIATE_LAYERS(float)
TXN_INSTANTIATE_LAYERS(double)

#undef TXN_INSTANTIATE_LAYERS

}  // namespace txn
