#pragma once

// Gram-matrix texture statistics and the feature-matching losses built on
// them. All losses on a batch are averages over the batch items.

#include <map>
#include <string>
#include <vector>

#include "txn/descriptor.hpp"

namespace txn {

/// Normalized Gram matrices of F [B,C,H,W]: G[b,i,j] = (1/HW) sum_p F[b,i,p] F[b,j,p].
/// Returns [B,C,C]; exactly symmetric.
template <typename T>
Tensor<T> gram(const Tensor<T>& features);

/// Target texture description: one [C,C] Gram matrix per descriptor layer.
template <typename T>
struct GramSet {
  std::map<std::string, Tensor<T>> grams;
  /// H*W of the feature map each Gram matrix was computed from.
  std::map<std::string, Index> spatial;
};

struct LossSpec {
  std::vector<std::string> texture_layers;
  /// Optional per-layer weights; missing layers weigh 1.
  std::map<std::string, double> texture_weights;
  std::vector<std::string> content_layers;
  double alpha = 0.0;

  /// Texture on every tap, content on the deepest tap.
  template <typename T>
  static LossSpec defaults_for(const DescriptorNet<T>& net);

  double weight(const std::string& layer) const;
  /// Throws ConfigError on unknown layers, negative weights or alpha < 0.
  template <typename T>
  void validate(const DescriptorNet<T>& net) const;
};

/// Gram matrices of a single prototype image [1,3,H,W], computed without a graph.
template <typename T>
GramSet<T> compute_grams(const DescriptorNet<T>& net, const Tensor<T>& prototype,
                         const LossSpec& spec);

/// sum_l w_l ||G_l(x) - G_l(x0)||_F^2, averaged over the batch.
template <typename T>
Tensor<T> texture_loss(const FeatureMaps<T>& features, const GramSet<T>& target,
                       const LossSpec& spec);
template <typename T>
Tensor<T> texture_loss(const Tensor<T>& x, const GramSet<T>& target,
                       const DescriptorNet<T>& net, const LossSpec& spec);

/// sum_l sum_i ||F_l,i(x) - F_l,i(y)||^2, averaged over the batch.
template <typename T>
Tensor<T> content_loss(const FeatureMaps<T>& features, const FeatureMaps<T>& content_features,
                       const LossSpec& spec);
template <typename T>
Tensor<T> content_loss(const Tensor<T>& x, const Tensor<T>& y, const DescriptorNet<T>& net,
                       const LossSpec& spec);

/// texture_loss + alpha * content_loss.
template <typename T>
Tensor<T> stylization_loss(const Tensor<T>& x, const Tensor<T>& y, const GramSet<T>& target,
                           const DescriptorNet<T>& net, const LossSpec& spec);

/// Squared distance between the mean quadratic embeddings
/// phi(v) = vec(v v^T) of the per-pixel channel vectors of two single-item
/// feature maps [1,C,H,W]. Computed pixel by pixel, independently of gram().
template <typename T>
double mmd_form(const Tensor<T>& fx, const Tensor<T>& fy);

}  // namespace txn
