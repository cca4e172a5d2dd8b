#pragma once

// Multi-scale feed-forward generator.
//
// Scales run coarse to fine. Each scale feeds its noise tensor (plus, in
// style mode, the content image downsampled to that scale) through a
// conv block. From the second scale on, the block output is batch
// normalized and concatenated with the batch-normalized, upsampled result
// of the previous scale, and a second conv block merges the two. A final
// 1x1 convolution maps the finest tensor to RGB. All convolutions are
// circular with stride 1.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "txn/layers.hpp"

namespace txn {

enum class GeneratorMode : std::uint8_t { kTexture = 0, kStyle = 1 };

std::string mode_name(GeneratorMode mode);

struct GeneratorArch {
  GeneratorMode mode = GeneratorMode::kTexture;
  /// Output channels c_1..c_K of each scale, coarse to fine.
  std::vector<int> channels{8, 16, 24, 32, 40};
  /// Output channels of the per-scale input block (scales 2..K).
  int branch_channels = 8;

  static constexpr int kMinChannels = 8;
  static constexpr int kMaxChannels = 40;

  /// K scales with channels min(8i, 40).
  static GeneratorArch with_scales(GeneratorMode mode, int scales);
  static GeneratorArch texture_default() { return with_scales(GeneratorMode::kTexture, 5); }
  static GeneratorArch style_default() { return with_scales(GeneratorMode::kStyle, 6); }

  int scales() const { return static_cast<int>(channels.size()); }
  /// Noise channel plus three image channels in style mode.
  int input_channels() const { return mode == GeneratorMode::kStyle ? 4 : 1; }
  /// Output extents must be divisible by this (2^(K-1)).
  int divisor() const { return 1 << (scales() - 1); }
  void validate() const;

  bool operator==(const GeneratorArch&) const = default;
};

/// K noise tensors [B,1,h_i,w_i], coarse to fine, extents halving per scale.
template <typename T>
struct NoiseStack {
  std::vector<Tensor<T>> z;

  int scales() const { return static_cast<int>(z.size()); }
  Index batch() const { return z.front().dim(0); }
  Index height() const { return z.back().dim(2); }
  Index width() const { return z.back().dim(3); }
};

/// i.i.d. uniform noise on [0, magnitude). Extents must be divisible by 2^(K-1).
template <typename T>
NoiseStack<T> sample_noise(Index height, Index width, int scales, Index batch, T magnitude,
                           std::uint64_t seed);

template <typename T>
NoiseStack<T> zero_noise(Index height, Index width, int scales, Index batch);

template <typename T>
struct ConvBnRelu {
  ConvSpec<T> conv;
  BatchNormState<T> bn;
};

/// 3x3 -> BN -> ReLU -> 3x3 -> BN -> ReLU -> 1x1 -> BN -> ReLU
template <typename T>
struct ConvBlock {
  std::array<ConvBnRelu<T>, 3> stages;

  static ConvBlock make(int in_channels, int out_channels);
  Tensor<T> forward(const Tensor<T>& x);
};

template <typename T>
struct GeneratorScale {
  ConvBlock<T> input_block;
  // Absent on the coarsest scale.
  std::optional<BatchNormState<T>> bn_upsampled;
  std::optional<BatchNormState<T>> bn_input;
  std::optional<ConvBlock<T>> merge_block;
};

template <typename T>
class GeneratorParams {
 public:
  GeneratorArch arch;
  std::vector<GeneratorScale<T>> scale;
  ConvSpec<T> to_rgb;

  /// Xavier-uniform conv weights, zero biases, identity batch norms.
  static GeneratorParams init(const GeneratorArch& arch, std::uint64_t seed);

  /// Trainable tensors in canonical order.
  std::vector<Tensor<T>> parameters() const;
  std::vector<BatchNormState<T>*> batch_norms();
  /// Switches every batch norm between batch statistics and running statistics.
  void set_training(bool training);
  bool training() const;

  /// Output [B,3,H,W]. `content` is required in style mode, rejected in texture mode.
  Tensor<T> forward(const NoiseStack<T>& noise, const Tensor<T>* content = nullptr);

  /// Deep copy (tensors are not shared with *this).
  GeneratorParams clone() const;
};

/// Xavier/Glorot uniform bound sqrt(6 / (fan_in + fan_out)).
double xavier_bound(int in_channels, int out_channels, int kh, int kw);

template <typename T>
Index count_params(const std::vector<Tensor<T>>& tensors);
template <typename T>
Index count_params(const GeneratorParams<T>& params) {
  return count_params(params.parameters());
}

/// Forward pass with every noise input except scale `keep` (1-based,
/// coarse to fine) replaced by zeros. The content pathway is untouched.
template <typename T>
Tensor<T> ablate_scales(GeneratorParams<T>& params, const NoiseStack<T>& noise, int keep,
                        const Tensor<T>* content = nullptr);

/// Params file: "TXNG1\0", u8 mode, u32 K, u32 branch channels, u32 x K
/// channels, f32 BN momentum, f32 BN eps, u32 tensor count, then per tensor
/// a u8 role tag, u32 rank, u32 x rank extents and f32 values. Includes
/// batch-norm running statistics.
template <typename T>
void save_params(const GeneratorParams<T>& params, const std::string& path);

/// Throws ModeError when `expected` is set and the file holds the other mode.
template <typename T>
GeneratorParams<T> load_params(const std::string& path,
                               std::optional<GeneratorMode> expected = std::nullopt);

}  // namespace txn
