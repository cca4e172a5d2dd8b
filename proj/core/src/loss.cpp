#include "txn/loss.hpp"

#include <algorithm>

#include "txn/error.hpp"
#include "txn/kernels.hpp"
#include "txn/ops.hpp"

namespace txn {

template <typename T>
Tensor<T> gram(const Tensor<T>& features) {
  if (features.rank() != 4) {
    throw ShapeError("gram: expected [B,C,H,W], got " + shape_string(features.shape()));
  }
  const int nb = static_cast<int>(features.dim(0));
  const int c = static_cast<int>(features.dim(1));
  const int hw = static_cast<int>(features.dim(2) * features.dim(3));
  const T inv = T{1} / static_cast<T>(hw);
  const T* fd = features.data().data();
  std::vector<T> out(static_cast<std::size_t>(nb) * c * c);
  std::vector<T> scratch(static_cast<std::size_t>(c) * hw);
  for (int b = 0; b < nb; ++b) {
    const T* fb = fd + static_cast<std::int64_t>(b) * c * hw;
    T* gb = out.data() + static_cast<std::int64_t>(b) * c * c;
    kernels::gemm_nt(c, c, hw, fb, fb, gb, false, scratch.data());
    for (int i = 0; i < c * c; ++i) gb[i] *= inv;
  }
  auto* pf = features.impl().get();
  return Tensor<T>::make_result({nb, c, c}, std::move(out), {features},
                                [=](std::span<const T> g) {
                                  auto gf = grad_slot(pf);
                                  if (gf.empty()) return;
                                  // dF = (dG + dG^T) F / HW
                                  std::vector<T> sym(static_cast<std::size_t>(c) * c);
                                  for (int b = 0; b < nb; ++b) {
                                    const T* gb = g.data() + static_cast<std::int64_t>(b) * c * c;
                                    for (int i = 0; i < c; ++i) {
                                      for (int j = 0; j < c; ++j) {
                                        sym[static_cast<std::size_t>(i * c + j)] =
                                            (gb[i * c + j] + gb[j * c + i]) * inv;
                                      }
                                    }
                                    const std::int64_t off = static_cast<std::int64_t>(b) * c * hw;
                                    kernels::gemm_nn(c, hw, c, sym.data(), pf->data.data() + off,
                                                     gf.data() + off, true);
                                  }
                                });
}

template <typename T>
LossSpec LossSpec::defaults_for(const DescriptorNet<T>& net) {
  LossSpec spec;
  spec.texture_layers = net.taps;
  if (!net.taps.empty()) spec.content_layers = {net.taps.back()};
  return spec;
}

double LossSpec::weight(const std::string& layer) const {
  const auto it = texture_weights.find(layer);
  return it == texture_weights.end() ? 1.0 : it->second;
}

template <typename T>
void LossSpec::validate(const DescriptorNet<T>& net) const {
  if (alpha < 0.0) throw ConfigError("content weight alpha must be >= 0");
  for (const auto& l : texture_layers) {
    if (!net.has_tap(l)) throw ConfigError("texture layer '" + l + "' is not a descriptor tap");
  }
  for (const auto& l : content_layers) {
    if (!net.has_tap(l)) throw ConfigError("content layer '" + l + "' is not a descriptor tap");
  }
  for (const auto& [l, w] : texture_weights) {
    if (w < 0.0) throw ConfigError("texture weight for '" + l + "' is negative");
    if (std::find(texture_layers.begin(), texture_layers.end(), l) == texture_layers.end()) {
      throw ConfigError("texture weight given for unused layer '" + l + "'");
    }
  }
}

template <typename T>
GramSet<T> compute_grams(const DescriptorNet<T>& net, const Tensor<T>& prototype,
                         const LossSpec& spec) {
  if (prototype.rank() != 4 || prototype.dim(0) != 1) {
    throw ShapeError("prototype must be [1,3,H,W], got " + shape_string(prototype.shape()));
  }
  NoGradGuard no_grad;
  const auto features = net.forward(prototype);
  GramSet<T> set;
  for (const auto& l : spec.texture_layers) {
    const auto& f = features.at(l);
    const Index c = f.dim(1);
    set.grams.emplace(l, reshape(gram(f), {c, c}));
    set.spatial.emplace(l, f.dim(2) * f.dim(3));
  }
  return set;
}

template <typename T>
Tensor<T> texture_loss(const FeatureMaps<T>& features, const GramSet<T>& target,
                       const LossSpec& spec) {
  if (target.grams.size() != spec.texture_layers.size()) {
    throw ShapeError("texture loss: target has " + std::to_string(target.grams.size()) +
                     " Gram matrices, loss uses " + std::to_string(spec.texture_layers.size()) +
                     " layers");
  }
  Tensor<T> total;
  for (const auto& l : spec.texture_layers) {
    const auto fit = features.find(l);
    const auto git = target.grams.find(l);
    if (fit == features.end() || git == target.grams.end()) {
      throw ShapeError("texture loss: layer '" + l + "' missing from features or target");
    }
    const Tensor<T> g = gram(fit->second);
    const Tensor<T> diff = sub(g, broadcast_to(git->second, g.shape()));
    const T w = static_cast<T>(spec.weight(l)) / static_cast<T>(g.dim(0));
    const Tensor<T> term = scale(sum(mul(diff, diff)), w);
    total = total.defined() ? add(total, term) : term;
  }
  return total.defined() ? total : Tensor<T>::scalar(T{0});
}

template <typename T>
Tensor<T> texture_loss(const Tensor<T>& x, const GramSet<T>& target,
                       const DescriptorNet<T>& net, const LossSpec& spec) {
  return texture_loss(net.forward(x), target, spec);
}

template <typename T>
Tensor<T> content_loss(const FeatureMaps<T>& features, const FeatureMaps<T>& content_features,
                       const LossSpec& spec) {
  Tensor<T> total;
  for (const auto& l : spec.content_layers) {
    const auto fx = features.find(l);
    const auto fy = content_features.find(l);
    if (fx == features.end() || fy == content_features.end()) {
      throw ShapeError("content loss: layer '" + l + "' missing from features");
    }
    if (fx->second.shape() != fy->second.shape()) {
      throw ShapeError("content loss: feature shapes " + shape_string(fx->second.shape()) +
                       " and " + shape_string(fy->second.shape()) + " differ at '" + l + "'");
    }
    const Tensor<T> diff = sub(fx->second, fy->second);
    const Tensor<T> term =
        scale(sum(mul(diff, diff)), T{1} / static_cast<T>(fx->second.dim(0)));
    total = total.defined() ? add(total, term) : term;
  }
  return total.defined() ? total : Tensor<T>::scalar(T{0});
}

template <typename T>
Tensor<T> content_loss(const Tensor<T>& x, const Tensor<T>& y, const DescriptorNet<T>& net,
                       const LossSpec& spec) {
  if (x.shape() != y.shape()) {
    throw ShapeError("content loss: image shapes " + shape_string(x.shape()) + " and " +
                     shape_string(y.shape()) + " differ");
  }
  FeatureMaps<T> fy;
  {
    NoGradGuard no_grad;
    fy = net.forward(y);
  }
  return content_loss(net.forward(x), fy, spec);
}

template <typename T>
Tensor<T> stylization_loss(const Tensor<T>& x, const Tensor<T>& y, const GramSet<T>& target,
                           const DescriptorNet<T>& net, const LossSpec& spec) {
  if (spec.alpha < 0.0) throw ConfigError("content weight alpha must be >= 0");
  if (x.shape() != y.shape()) {
    throw ShapeError("stylization loss: image shapes " + shape_string(x.shape()) + " and " +
                     shape_string(y.shape()) + " differ");
  }
  FeatureMaps<T> fy;
  {
    NoGradGuard no_grad;
    fy = net.forward(y);
  }
  const auto fx = net.forward(x);
  return add(texture_loss(fx, target, spec),
             scale(content_loss(fx, fy, spec), static_cast<T>(spec.alpha)));
}

template <typename T>
double mmd_form(const Tensor<T>& fx, const Tensor<T>& fy) {
  if (fx.rank() != 4 || fy.rank() != 4 || fx.dim(0) != 1 || fy.dim(0) != 1 ||
      fx.dim(1) != fy.dim(1)) {
    throw ShapeError("mmd_form: expected [1,C,H,W] maps with equal C, got " +
                     shape_string(fx.shape()) + " and " + shape_string(fy.shape()));
  }
  const auto c = static_cast<std::size_t>(fx.dim(1));
  auto mean_embedding = [c](const Tensor<T>& f) {
    const auto n = static_cast<std::size_t>(f.dim(2) * f.dim(3));
    const auto d = f.data();
    std::vector<double> mu(c * c, 0.0);
    std::vector<double> v(c);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t i = 0; i < c; ++i) v[i] = static_cast<double>(d[i * n + p]);
      for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) mu[i * c + j] += v[i] * v[j];
      }
    }
    for (auto& m : mu) m /= static_cast<double>(n);
    return mu;
  };
  const auto mx = mean_embedding(fx);
  const auto my = mean_embedding(fy);
  double total = 0.0;
  for (std::size_t k = 0; k < mx.size(); ++k) {
    const double d = mx[k] - my[k];
    total += d * d;
  }
  return total;
}

#define TXN_INSTANTIATE_LOSS(T)                                                             \
  template Tensor<T> gram<T>(const Tensor<T>&);                                             \
  template struct GramSet<T>;                                                               \
  template LossSpec LossSpec::defaults_for<T>(const DescriptorNet<T>&);                     \
  template void LossSpec::validate<T>(const DescriptorNet<T>&) const;                       \
  template GramSet<T> compute_grams<T>(const DescriptorNet<T>&, const Tensor<T>&,           \
                                       const LossSpec&);                                    \
  template Tensor<T> texture_loss<T>(const FeatureMaps<T>&, const GramSet<T>&,              \
                                     const LossSpec&);                                      \
  template Tensor<T> texture_loss<T>(const Tensor<T>&, const GramSet<T>&,                   \
                                     const DescriptorNet<T>&, const LossSpec&);             \
  template Tensor<T> content_loss<T>(const FeatureMaps<T>&, const FeatureMaps<T>&,          \
                                     const LossSpec&);                                      \
  template Tensor<T> content_loss<T>(const Tensor<T>&, const Tensor<T>&,                    \
                                     const DescriptorNet<T>&, const LossSpec&);             \
  template Tensor<T> stylization_loss<T>(const Tensor<T>&, const Tensor<T>&,                \
                                         const GramSet<T>&, const DescriptorNet<T>&,        \
                                         const LossSpec&);                                  \
  template double mmd_form<T>(const Tensor<T>&, const Tensor<T>&);

TXN_INSTANTIATE_LOSS(float)
TXN_INSTANTIATE_LOSS(double)

#undef TXN_INSTANTIATE_LOSS

}  // namespace txn
