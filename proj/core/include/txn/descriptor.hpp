#pragma once

// Fixed feature-extraction network whose activations define the losses.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "txn/layers.hpp"

namespace txn {

enum class DescriptorLayerKind : std::uint8_t { kConv, kRelu, kPool };

template <typename T>
struct DescriptorLayer {
  std::string id;
  DescriptorLayerKind kind = DescriptorLayerKind::kRelu;
  ConvSpec<T> conv;  // kConv only
  PoolKind pool = PoolKind::kAverage;  // kPool only
};

template <typename T>
using FeatureMaps = std::map<std::string, Tensor<T>>;

/// Ordered layer list with named tap points. Weights never take gradients.
template <typename T>
class DescriptorNet {
 public:
  std::vector<DescriptorLayer<T>> layers;
  std::vector<std::string> taps;

  /// conv3x3x16 - relu - pool - conv3x3x32 - relu - pool with taps relu1 and
  /// relu2; zero padding, average pooling, seeded orthonormal filters.
  static DescriptorNet tiny(std::uint64_t seed = kDefaultSeed);

  /// Parses the text architecture format and fills convolutions with
  /// seeded orthonormal filters.
  ///
  ///   padding zero|circular      default padding for conv lines
  ///   pool_kind avg|max          default kind for pool lines
  ///   conv <id> <in> <out> <k>
  ///   relu <id>
  ///   pool <id> [avg|max]
  ///   tap <id>
  static DescriptorNet from_spec(const std::string& text, std::uint64_t seed = kDefaultSeed);

  /// Throws ShapeError/ConfigError on duplicate ids, unknown taps, channel
  /// chains that do not line up or weights that take gradients.
  void validate() const;

  bool has_tap(const std::string& id) const;
  int channels_at(const std::string& id) const;
  /// Product of pooling factors up to the last tap.
  int reduction() const;

  /// Feature maps at every tap. The graph extends back into x only.
  FeatureMaps<T> forward(const Tensor<T>& x) const;

  template <typename U>
  DescriptorNet<U> cast() const;

  static constexpr std::uint64_t kDefaultSeed = 20160310;
};

/// Seeded random filters with orthonormal rows (rows = out channels, row
/// length = in*kh*kw); when there are more rows than the row length, blocks
/// of rows are orthonormalized independently.
template <typename T>
void init_orthonormal(ConvSpec<T>& conv, std::uint64_t seed);

/// Weight file: "TXNW1\0", u32 layer count, then per layer a u8 kind tag,
/// u32x4 weight shape, f32 weights, u32 bias length, f32 biases.
template <typename T>
void save_weights(const DescriptorNet<T>& net, const std::string& path);

/// Loads layers with generated ids (conv1, relu1, pool1, ...) and no taps.
template <typename T>
DescriptorNet<T> load_weights(const std::string& path);

/// Loads a weight file into an architecture, keeping the architecture's ids
/// and taps. Throws FormatError when layer kinds or shapes disagree.
template <typename T>
DescriptorNet<T> load_weights_into(const DescriptorNet<T>& arch, const std::string& path);

}  // namespace txn
