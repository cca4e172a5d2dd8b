#include "txn/generator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "txn/binary_io.hpp"
#include "txn/error.hpp"
#include "txn/random.hpp"

namespace txn {
namespace {

constexpr char kParamsMagic[] = {'T', 'X', 'N', 'G', '1', '\0'};

enum RoleTag : std::uint8_t {
  kRoleWeight = 1,
  kRoleBias = 2,
  kRoleGamma = 3,
  kRoleBeta = 4,
  kRoleRunningMean = 5,
  kRoleRunningVar = 6,
};

// Visits every stored tensor (trainable and running statistics) in the
// canonical file order.
template <typename P, typename Fn>
void visit_state(P& params, Fn&& fn) {
  auto conv = [&](auto& spec) {
    fn(kRoleWeight, spec.weight);
    fn(kRoleBias, spec.bias);
  };
  auto bn = [&](auto& state) {
    fn(kRoleGamma, state.gamma);
    fn(kRoleBeta, state.beta);
    fn(kRoleRunningMean, state.running_mean);
    fn(kRoleRunningVar, state.running_var);
  };
  auto block = [&](auto& b) {
    for (auto& stage : b.stages) {
      conv(stage.conv);
      bn(stage.bn);
    }
  };
  for (auto& s : params.scale) {
    block(s.input_block);
    if (s.merge_block) {
      bn(*s.bn_upsampled);
      bn(*s.bn_input);
      block(*s.merge_block);
    }
  }
  conv(params.to_rgb);
}

template <typename T>
void xavier_fill(ConvSpec<T>& conv, Rng& rng) {
  const double a = xavier_bound(conv.in_channels(), conv.out_channels(), conv.kernel_h(),
                                conv.kernel_w());
  for (auto& w : conv.weight.mutable_data()) w = static_cast<T>(rng.uniform(-a, a));
  auto b = conv.bias.mutable_data();
  std::fill(b.begin(), b.end(), T{0});
}

template <typename T>
GeneratorParams<T> build(const GeneratorArch& arch) {
  arch.validate();
  GeneratorParams<T> p;
  p.arch = arch;
  const int k = arch.scales();
  for (int i = 0; i < k; ++i) {
    GeneratorScale<T> s;
    if (i == 0) {
      s.input_block = ConvBlock<T>::make(arch.input_channels(), arch.channels[0]);
    } else {
      s.input_block = ConvBlock<T>::make(arch.input_channels(), arch.branch_channels);
      s.bn_upsampled = BatchNormState<T>::identity(arch.channels[static_cast<std::size_t>(i - 1)], true);
      s.bn_input = BatchNormState<T>::identity(arch.branch_channels, true);
      s.merge_block = ConvBlock<T>::make(
          arch.channels[static_cast<std::size_t>(i - 1)] + arch.branch_channels,
          arch.channels[static_cast<std::size_t>(i)]);
    }
    p.scale.push_back(std::move(s));
  }
  p.to_rgb = ConvSpec<T>::zeros(arch.channels.back(), 3, 1, 1, PaddingMode::kCircular, true);
  return p;
}

template <typename T>
void check_noise(const GeneratorArch& arch, const NoiseStack<T>& noise) {
  if (noise.scales() != arch.scales()) {
    throw ShapeError("noise stack has " + std::to_string(noise.scales()) +
                     " scales, generator has " + std::to_string(arch.scales()));
  }
  const Index nb = noise.batch();
  const Index h = noise.height();
  const Index w = noise.width();
  for (int i = 0; i < noise.scales(); ++i) {
    const Index f = Index{1} << (noise.scales() - 1 - i);
    const auto& z = noise.z[static_cast<std::size_t>(i)];
    const Shape expected{nb, 1, h / f, w / f};
    if (h % f != 0 || w % f != 0 || z.shape() != expected) {
      throw ShapeError("noise scale " + std::to_string(i + 1) + " has shape " +
                       shape_string(z.shape()) + ", expected " + shape_string(expected));
    }
  }
}

}  // namespace

std::string mode_name(GeneratorMode mode) {
  return mode == GeneratorMode::kStyle ? "style" : "texture";
}

GeneratorArch GeneratorArch::with_scales(GeneratorMode mode, int scales) {
  GeneratorArch arch;
  arch.mode = mode;
  arch.channels.clear();
  for (int i = 1; i <= scales; ++i) arch.channels.push_back(std::min(8 * i, kMaxChannels));
  arch.validate();
  return arch;
}

void GeneratorArch::validate() const {
  if (channels.empty()) throw ConfigError("generator needs at least one scale");
  if (channels.size() > 12) throw ConfigError("generator supports at most 12 scales");
  auto in_range = [](int c) { return c >= kMinChannels && c <= kMaxChannels; };
  for (const int c : channels) {
    if (!in_range(c)) {
      throw ConfigError("generator channel count " + std::to_string(c) + " outside [" +
                        std::to_string(kMinChannels) + "," + std::to_string(kMaxChannels) + "]");
    }
  }
  if (channels.size() > 1 && !in_range(branch_channels)) {
    throw ConfigError("generator branch channel count " + std::to_string(branch_channels) +
                      " outside [" + std::to_string(kMinChannels) + "," +
                      std::to_string(kMaxChannels) + "]");
  }
}

double xavier_bound(int in_channels, int out_channels, int kh, int kw) {
  const double fan_in = static_cast<double>(in_channels) * kh * kw;
  const double fan_out = static_cast<double>(out_channels) * kh * kw;
  return std::sqrt(6.0 / (fan_in + fan_out));
}

template <typename T>
NoiseStack<T> sample_noise(Index height, Index width, int scales, Index batch, T magnitude,
                           std::uint64_t seed) {
  if (scales < 1) throw ConfigError("noise stack needs at least one scale");
  if (batch < 1) throw ConfigError("noise batch must be positive");
  if (magnitude < T{0}) throw ConfigError("noise magnitude must be >= 0");
  const Index div = Index{1} << (scales - 1);
  if (height < 1 || width < 1 || height % div != 0 || width % div != 0) {
    throw ShapeError("noise extent " + std::to_string(height) + "x" + std::to_string(width) +
                     " not divisible by 2^" + std::to_string(scales - 1));
  }
  Rng rng(seed);
  NoiseStack<T> stack;
  for (int i = 0; i < scales; ++i) {
    const Index f = Index{1} << (scales - 1 - i);
    const Shape shape{batch, 1, height / f, width / f};
    std::vector<T> values(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : values) {
      v = static_cast<T>(rng.uniform_float()) * magnitude;
      // Keep the support half-open after rounding.
      if (v >= magnitude && magnitude > T{0}) v = std::nextafter(magnitude, T{0});
    }
    stack.z.push_back(Tensor<T>::from_data(shape, std::move(values)));
  }
  return stack;
}

template <typename T>
NoiseStack<T> zero_noise(Index height, Index width, int scales, Index batch) {
  return sample_noise<T>(height, width, scales, batch, T{0}, 0);
}

template <typename T>
ConvBlock<T> ConvBlock<T>::make(int in_channels, int out_channels) {
  ConvBlock b;
  const int in[3] = {in_channels, out_channels, out_channels};
  const int k[3] = {3, 3, 1};
  for (int i = 0; i < 3; ++i) {
    auto& s = b.stages[static_cast<std::size_t>(i)];
    s.conv = ConvSpec<T>::zeros(in[i], out_channels, k[i], k[i], PaddingMode::kCircular, true);
    s.bn = BatchNormState<T>::identity(out_channels, true);
  }
  return b;
}

template <typename T>
Tensor<T> ConvBlock<T>::forward(const Tensor<T>& x) {
  Tensor<T> cur = x;
  for (auto& s : stages) cur = relu(batch_norm(conv2d(cur, s.conv), s.bn));
  return cur;
}

template <typename T>
GeneratorParams<T> GeneratorParams<T>::init(const GeneratorArch& arch, std::uint64_t seed) {
  GeneratorParams p = build<T>(arch);
  Rng rng(seed);
  for (auto& s : p.scale) {
    for (auto& st : s.input_block.stages) xavier_fill(st.conv, rng);
    if (s.merge_block) {
      for (auto& st : s.merge_block->stages) xavier_fill(st.conv, rng);
    }
  }
  xavier_fill(p.to_rgb, rng);
  return p;
}

template <typename T>
std::vector<Tensor<T>> GeneratorParams<T>::parameters() const {
  std::vector<Tensor<T>> out;
  visit_state(*this, [&](std::uint8_t role, const Tensor<T>& t) {
    if (role != kRoleRunningMean && role != kRoleRunningVar) out.push_back(t);
  });
  return out;
}

template <typename T>
std::vector<BatchNormState<T>*> GeneratorParams<T>::batch_norms() {
  std::vector<BatchNormState<T>*> out;
  for (auto& s : scale) {
    for (auto& st : s.input_block.stages) out.push_back(&st.bn);
    if (s.merge_block) {
      out.push_back(&*s.bn_upsampled);
      out.push_back(&*s.bn_input);
      for (auto& st : s.merge_block->stages) out.push_back(&st.bn);
    }
  }
  return out;
}

template <typename T>
void GeneratorParams<T>::set_training(bool training) {
  for (auto* bn : batch_norms()) bn->training = training;
}

template <typename T>
bool GeneratorParams<T>::training() const {
  return scale.front().input_block.stages.front().bn.training;
}

template <typename T>
Tensor<T> GeneratorParams<T>::forward(const NoiseStack<T>& noise, const Tensor<T>* content) {
  check_noise(arch, noise);
  const int k = arch.scales();
  std::vector<Tensor<T>> pyramid;
  if (arch.mode == GeneratorMode::kStyle) {
    if (content == nullptr) throw ModeError("style generator needs a content image");
    const Shape expected{noise.batch(), 3, noise.height(), noise.width()};
    if (content->shape() != expected) {
      throw ShapeError("content image " + shape_string(content->shape()) +
                       " does not match output extent " + shape_string(expected));
    }
    pyramid = downsample_image(*content, k - 1);
  } else if (content != nullptr) {
    throw ModeError("texture generator does not take a content image");
  }

  Tensor<T> cur;
  for (int i = 0; i < k; ++i) {
    auto& s = scale[static_cast<std::size_t>(i)];
    Tensor<T> input = noise.z[static_cast<std::size_t>(i)];
    if (!pyramid.empty()) {
      input = concat_channels(input, pyramid[static_cast<std::size_t>(k - 1 - i)]);
    }
    Tensor<T> branch = s.input_block.forward(input);
    if (i == 0) {
      cur = branch;
      continue;
    }
    const Tensor<T> up = batch_norm(upsample_nearest(cur, 2), *s.bn_upsampled);
    cur = s.merge_block->forward(concat_channels(up, batch_norm(branch, *s.bn_input)));
  }
  return conv2d(cur, to_rgb);
}

template <typename T>
GeneratorParams<T> GeneratorParams<T>::clone() const {
  GeneratorParams copy = build<T>(arch);
  std::vector<Tensor<T>> src;
  visit_state(*this, [&](std::uint8_t, const Tensor<T>& t) { src.push_back(t); });
  std::size_t i = 0;
  visit_state(copy, [&](std::uint8_t, Tensor<T>& t) {
    const auto s = src[i++].data();
    std::copy(s.begin(), s.end(), t.mutable_data().begin());
  });
  auto dst_bn = copy.batch_norms();
  auto src_bn = const_cast<GeneratorParams*>(this)->batch_norms();
  for (std::size_t j = 0; j < dst_bn.size(); ++j) {
    dst_bn[j]->momentum = src_bn[j]->momentum;
    dst_bn[j]->eps = src_bn[j]->eps;
    dst_bn[j]->training = src_bn[j]->training;
  }
  return copy;
}

template <typename T>
Index count_params(const std::vector<Tensor<T>>& tensors) {
  Index n = 0;
  for (const auto& t : tensors) n += t.numel();
  return n;
}

template <typename T>
Tensor<T> ablate_scales(GeneratorParams<T>& params, const NoiseStack<T>& noise, int keep,
                        const Tensor<T>* content) {
  if (keep < 1 || keep > noise.scales()) {
    throw ConfigError("ablation keeps scale " + std::to_string(keep) + ", valid range is [1," +
                      std::to_string(noise.scales()) + "]");
  }
  NoiseStack<T> masked;
  for (int i = 0; i < noise.scales(); ++i) {
    const auto& z = noise.z[static_cast<std::size_t>(i)];
    masked.z.push_back(i + 1 == keep ? z : Tensor<T>::zeros(z.shape()));
  }
  return params.forward(masked, content);
}

template <typename T>
void save_params(const GeneratorParams<T>& params, const std::string& path) {
  io::BinaryWriter out(path);
  out.magic({kParamsMagic, sizeof(kParamsMagic)});
  out.u8(static_cast<std::uint8_t>(params.arch.mode));
  out.u32(static_cast<std::uint32_t>(params.arch.scales()));
  out.u32(static_cast<std::uint32_t>(params.arch.branch_channels));
  for (const int c : params.arch.channels) out.u32(static_cast<std::uint32_t>(c));
  const auto& bn0 = params.scale.front().input_block.stages.front().bn;
  out.f32(static_cast<float>(bn0.momentum));
  out.f32(static_cast<float>(bn0.eps));
  std::uint32_t count = 0;
  visit_state(params, [&](std::uint8_t, const Tensor<T>&) { ++count; });
  out.u32(count);
  visit_state(params, [&](std::uint8_t role, const Tensor<T>& t) {
    out.u8(role);
    out.u32(static_cast<std::uint32_t>(t.rank()));
    for (const Index d : t.shape()) out.u32(static_cast<std::uint32_t>(d));
    out.f32_array(t.data());
  });
  out.finish();
}

template <typename T>
GeneratorParams<T> load_params(const std::string& path, std::optional<GeneratorMode> expected) {
  io::BinaryReader in(path);
  in.expect_magic({kParamsMagic, sizeof(kParamsMagic)}, "generator params");
  GeneratorArch arch;
  const std::uint8_t mode = in.u8();
  if (mode > 1) throw FormatError("'" + path + "': unknown generator mode " + std::to_string(mode));
  arch.mode = static_cast<GeneratorMode>(mode);
  const std::uint32_t k = in.u32();
  if (k < 1 || k > 12) throw FormatError("'" + path + "': implausible scale count " + std::to_string(k));
  arch.branch_channels = static_cast<int>(in.u32());
  arch.channels.clear();
  for (std::uint32_t i = 0; i < k; ++i) arch.channels.push_back(static_cast<int>(in.u32()));
  try {
    arch.validate();
  } catch (const ConfigError& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  if (expected && *expected != arch.mode) {
    throw ModeError("'" + path + "' holds " + mode_name(arch.mode) + " parameters, " +
                    mode_name(*expected) + " mode requested");
  }
  const T momentum = static_cast<T>(in.f32());
  const T eps = static_cast<T>(in.f32());
  GeneratorParams<T> params = build<T>(arch);
  std::uint32_t count = 0;
  visit_state(params, [&](std::uint8_t, const Tensor<T>&) { ++count; });
  const std::uint32_t stored = in.u32();
  if (stored != count) {
    throw FormatError("'" + path + "' stores " + std::to_string(stored) + " tensors, architecture needs " +
                      std::to_string(count));
  }
  visit_state(params, [&](std::uint8_t role, Tensor<T>& t) {
    const std::uint8_t tag = in.u8();
    if (tag != role) throw FormatError("'" + path + "': tensor role mismatch");
    const std::uint32_t rank = in.u32();
    Shape shape;
    for (std::uint32_t d = 0; d < rank && d < 8; ++d) shape.push_back(in.u32());
    if (shape != t.shape()) {
      throw FormatError("'" + path + "': tensor shape " + shape_string(shape) + " vs expected " +
                        shape_string(t.shape()));
    }
    const auto values = in.f32_array<T>(static_cast<std::size_t>(t.numel()));
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
  });
  if (!in.at_end()) throw FormatError("'" + path + "': trailing bytes");
  for (auto* bn : params.batch_norms()) {
    bn->momentum = momentum;
    bn->eps = eps;
  }
  return params;
}

#define TXN_INSTANTIATE_GENERATOR(T)                                                        \
  template NoiseStack<T> sample_noise<T>(Index, Index, int, Index, T, std::uint64_t);       \
  template NoiseStack<T> zero_noise<T>(Index, Index, int, Index);                           \
  template struct ConvBlock<T>;                                                             \
  template class GeneratorParams<T>;                                                        \
  template Index count_params<T>(const std::vector<Tensor<T>>&);                            \
  template Tensor<T> ablate_scales<T>(GeneratorParams<T>&, const NoiseStack<T>&, int,       \
                                      const Tensor<T>*);                                    \
  template void save_params<T>(const GeneratorParams<T>&, const std::string&);              \
  template GeneratorParams<T> load_params<T>(const std::string&, std::optional<GeneratorMode>);

TXN_INSTANTIATE_GENERATOR(float)
TXN_INSTANTIATE_GENERATOR(double)

#undef TXN_INSTANTIATE_GENERATOR

}  // namespace txn
