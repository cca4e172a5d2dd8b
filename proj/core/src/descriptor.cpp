#include "txn/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "txn/binary_io.hpp"
#include "txn/error.hpp"
#include "txn/random.hpp"

namespace txn {
namespace {

constexpr char kWeightMagic[] = {'T', 'X', 'N', 'W', '1', '\0'};

enum WeightTag : std::uint8_t {
  kTagConvZero = 1,
  kTagConvCircular = 2,
  kTagRelu = 3,
  kTagPoolAvg = 4,
  kTagPoolMax = 5,
};

template <typename T>
std::uint8_t tag_of(const DescriptorLayer<T>& layer) {
  switch (layer.kind) {
    case DescriptorLayerKind::kConv:
      return layer.conv.padding == PaddingMode::kCircular ? kTagConvCircular : kTagConvZero;
    case DescriptorLayerKind::kRelu:
      return kTagRelu;
    case DescriptorLayerKind::kPool:
      return layer.pool == PoolKind::kMax ? kTagPoolMax : kTagPoolAvg;
  }
  return 0;
}

// Shifts the first convolution's bias so a mid-gray image maps to zero.
template <typename T>
void center_on_mid_gray(ConvSpec<T>& conv) {
  const auto w = conv.weight.data();
  auto b = conv.bias.mutable_data();
  const std::size_t row = w.size() / b.size();
  for (std::size_t o = 0; o < b.size(); ++o) {
    T s{0};
    for (std::size_t k = 0; k < row; ++k) s += w[o * row + k];
    b[o] = T(-0.5) * s;
  }
}

template <typename T>
void finish_init(DescriptorNet<T>& net, std::uint64_t seed) {
  bool first = true;
  std::uint64_t salt = 0;
  for (auto& layer : net.layers) {
    if (layer.kind != DescriptorLayerKind::kConv) continue;
    init_orthonormal(layer.conv, seed + 7919 * ++salt);
    if (first) center_on_mid_gray(layer.conv);
    first = false;
  }
  net.validate();
}

}  // namespace

template <typename T>
void init_orthonormal(ConvSpec<T>& conv, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t rows = static_cast<std::size_t>(conv.out_channels());
  const std::size_t len = static_cast<std::size_t>(conv.in_channels()) *
                          static_cast<std::size_t>(conv.kernel_h() * conv.kernel_w());
  std::vector<double> w(rows * len);
  for (auto& v : w) v = rng.normal();
  // Modified Gram-Schmidt, restarting every `len` rows.
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = w.data() + r * len;
    const std::size_t block_start = (r / len) * len;
    for (std::size_t q = block_start; q < r; ++q) {
      const double* prev = w.data() + q * len;
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += row[k] * prev[k];
      for (std::size_t k = 0; k < len; ++k) row[k] -= dot * prev[k];
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < len; ++k) norm += row[k] * row[k];
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < len; ++k) row[k] /= norm;
  }
  auto dst = conv.weight.mutable_data();
  for (std::size_t i = 0; i < w.size(); ++i) dst[i] = static_cast<T>(w[i]);
  auto b = conv.bias.mutable_data();
  std::fill(b.begin(), b.end(), T{0});
}

template <typename T>
DescriptorNet<T> DescriptorNet<T>::tiny(std::uint64_t seed) {
  return from_spec(
      "padding zero\n"
      "pool_kind avg\n"
      "conv conv1 3 16 3\n"
      "relu relu1\n"
      "pool pool1\n"
      "conv conv2 16 32 3\n"
      "relu relu2\n"
      "pool pool2\n"
      "tap relu1\n"
      "tap relu2\n",
      seed);
}

template <typename T>
DescriptorNet<T> DescriptorNet<T>::from_spec(const std::string& text, std::uint64_t seed) {
  DescriptorNet net;
  PaddingMode padding = PaddingMode::kZero;
  PoolKind pool_kind = PoolKind::kAverage;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto parse_pool = [&](const std::string& s) {
    if (s == "avg") return PoolKind::kAverage;
    if (s == "max") return PoolKind::kMax;
    throw ConfigError("descriptor spec line " + std::to_string(line_no) + ": unknown pool kind '" +
                      s + "'");
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string key;
    if (!(fields >> key)) continue;
    auto fail = [&](const std::string& why) {
      throw ConfigError("descriptor spec line " + std::to_string(line_no) + ": " + why);
    };
    if (key == "padding") {
      std::string v;
      fields >> v;
      if (v == "zero") {
        padding = PaddingMode::kZero;
      } else if (v == "circular") {
        padding = PaddingMode::kCircular;
      } else {
        fail("unknown padding '" + v + "'");
      }
    } else if (key == "pool_kind") {
      std::string v;
      fields >> v;
      pool_kind = parse_pool(v);
    } else if (key == "conv") {
      DescriptorLayer<T> layer;
      int cin = 0;
      int cout = 0;
      int k = 0;
      if (!(fields >> layer.id >> cin >> cout >> k) || cin < 1 || cout < 1 || k < 1) {
        fail("expected 'conv <id> <in> <out> <kernel>'");
      }
      if (k % 2 == 0) fail("kernel extent must be odd");
      layer.kind = DescriptorLayerKind::kConv;
      layer.conv = ConvSpec<T>::zeros(cin, cout, k, k, padding, false);
      net.layers.push_back(std::move(layer));
    } else if (key == "relu") {
      DescriptorLayer<T> layer;
      if (!(fields >> layer.id)) fail("expected 'relu <id>'");
      layer.kind = DescriptorLayerKind::kRelu;
      net.layers.push_back(std::move(layer));
    } else if (key == "pool") {
      DescriptorLayer<T> layer;
      if (!(fields >> layer.id)) fail("expected 'pool <id> [avg|max]'");
      layer.kind = DescriptorLayerKind::kPool;
      std::string kind;
      layer.pool = (fields >> kind) ? parse_pool(kind) : pool_kind;
      net.layers.push_back(std::move(layer));
    } else if (key == "tap") {
      std::string id;
      if (!(fields >> id)) fail("expected 'tap <id>'");
      net.taps.push_back(id);
    } else {
      fail("unknown directive '" + key + "'");
    }
    std::string extra;
    if (fields >> extra) fail("unexpected trailing field '" + extra + "'");
  }
  finish_init(net, seed);
  return net;
}

template <typename T>
void DescriptorNet<T>::validate() const {
  std::set<std::string> ids;
  int channels = 3;
  for (const auto& layer : layers) {
    if (layer.id.empty() || !ids.insert(layer.id).second) {
      throw ConfigError("descriptor layer id '" + layer.id + "' is empty or duplicated");
    }
    if (layer.kind == DescriptorLayerKind::kConv) {
      layer.conv.validate();
      if (layer.conv.weight.requires_grad() || layer.conv.bias.requires_grad()) {
        throw ConfigError("descriptor weights must be frozen");
      }
      if (layer.conv.in_channels() != channels) {
        throw ShapeError("descriptor layer '" + layer.id + "' expects " +
                         std::to_string(layer.conv.in_channels()) + " channels, receives " +
                         std::to_string(channels));
      }
      channels = layer.conv.out_channels();
    }
  }
  std::set<std::string> tap_set;
  for (const auto& t : taps) {
    if (ids.count(t) == 0) throw ConfigError("descriptor tap '" + t + "' is not a layer id");
    if (!tap_set.insert(t).second) throw ConfigError("descriptor tap '" + t + "' is duplicated");
  }
}

template <typename T>
bool DescriptorNet<T>::has_tap(const std::string& id) const {
  return std::find(taps.begin(), taps.end(), id) != taps.end();
}

template <typename T>
int DescriptorNet<T>::channels_at(const std::string& id) const {
  int channels = 3;
  for (const auto& layer : layers) {
    if (layer.kind == DescriptorLayerKind::kConv) channels = layer.conv.out_channels();
    if (layer.id == id) return channels;
  }
  throw ConfigError("unknown descriptor layer '" + id + "'");
}

template <typename T>
int DescriptorNet<T>::reduction() const {
  int factor = 1;
  int result = 1;
  std::size_t remaining = taps.size();
  for (const auto& layer : layers) {
    if (remaining == 0) break;
    if (layer.kind == DescriptorLayerKind::kPool) factor *= 2;
    if (has_tap(layer.id)) {
      result = factor;
      --remaining;
    }
  }
  return result;
}

template <typename T>
FeatureMaps<T> DescriptorNet<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != 3) {
    throw ShapeError("descriptor input must be [B,3,H,W], got " + shape_string(x.shape()));
  }
  FeatureMaps<T> out;
  Tensor<T> cur = x;
  std::size_t remaining = taps.size();
  for (const auto& layer : layers) {
    if (remaining == 0) break;
    switch (layer.kind) {
      case DescriptorLayerKind::kConv:
        cur = conv2d(cur, layer.conv);
        break;
      case DescriptorLayerKind::kRelu:
        cur = relu(cur);
        break;
      case DescriptorLayerKind::kPool:
        if (cur.dim(2) < 2 || cur.dim(3) < 2) {
          throw ShapeError("descriptor pool '" + layer.id + "' would shrink " +
                           shape_string(cur.shape()) + " below one pixel");
        }
        cur = pool2d(cur, layer.pool, 2, 2);
        break;
    }
    if (has_tap(layer.id)) {
      out.emplace(layer.id, cur);
      --remaining;
    }
  }
  return out;
}

template <typename T>
template <typename U>
DescriptorNet<U> DescriptorNet<T>::cast() const {
  DescriptorNet<U> net;
  net.taps = taps;
  for (const auto& layer : layers) {
    DescriptorLayer<U> l;
    l.id = layer.id;
    l.kind = layer.kind;
    l.pool = layer.pool;
    if (layer.kind == DescriptorLayerKind::kConv) {
      l.conv.weight = layer.conv.weight.template cast<U>();
      l.conv.bias = layer.conv.bias.template cast<U>();
      l.conv.padding = layer.conv.padding;
    }
    net.layers.push_back(std::move(l));
  }
  return net;
}

template <typename T>
void save_weights(const DescriptorNet<T>& net, const std::string& path) {
  io::BinaryWriter out(path);
  out.magic({kWeightMagic, sizeof(kWeightMagic)});
  out.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    out.u8(tag_of(layer));
    if (layer.kind == DescriptorLayerKind::kConv) {
      for (const Index d : layer.conv.weight.shape()) out.u32(static_cast<std::uint32_t>(d));
      out.f32_array(layer.conv.weight.data());
      out.u32(static_cast<std::uint32_t>(layer.conv.bias.numel()));
      out.f32_array(layer.conv.bias.data());
    } else {
      for (int i = 0; i < 4; ++i) out.u32(0);
      out.u32(0);
    }
  }
  out.finish();
}

template <typename T>
DescriptorNet<T> load_weights(const std::string& path) {
  io::BinaryReader in(path);
  in.expect_magic({kWeightMagic, sizeof(kWeightMagic)}, "descriptor weight");
  const std::uint32_t count = in.u32();
  DescriptorNet<T> net;
  int n_conv = 0;
  int n_relu = 0;
  int n_pool = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint8_t tag = in.u8();
    std::uint32_t dims[4];
    for (auto& d : dims) d = in.u32();
    DescriptorLayer<T> layer;
    if (tag == kTagConvZero || tag == kTagConvCircular) {
      for (const auto d : dims) {
        if (d == 0 || d > (1U << 16)) throw FormatError("'" + path + "': implausible conv shape");
      }
      const Shape shape{dims[0], dims[1], dims[2], dims[3]};
      auto weights = in.f32_array<T>(static_cast<std::size_t>(shape_numel(shape)));
      const std::uint32_t nbias = in.u32();
      if (nbias != dims[0]) {
        throw FormatError("'" + path + "': bias length " + std::to_string(nbias) +
                          " does not match " + std::to_string(dims[0]) + " output channels");
      }
      auto biases = in.f32_array<T>(nbias);
      if (dims[2] % 2 == 0 || dims[3] % 2 == 0) {
        throw FormatError("'" + path + "': even kernel extent");
      }
      layer.kind = DescriptorLayerKind::kConv;
      layer.id = "conv" + std::to_string(++n_conv);
      layer.conv.weight = Tensor<T>::from_data(shape, std::move(weights));
      layer.conv.bias = Tensor<T>::from_data({static_cast<Index>(nbias)}, std::move(biases));
      layer.conv.padding = tag == kTagConvCircular ? PaddingMode::kCircular : PaddingMode::kZero;
    } else if (tag == kTagRelu || tag == kTagPoolAvg || tag == kTagPoolMax) {
      const std::uint32_t nbias = in.u32();
      if (dims[0] || dims[1] || dims[2] || dims[3] || nbias) {
        throw FormatError("'" + path + "': parameter-free layer carries weights");
      }
      if (tag == kTagRelu) {
        layer.kind = DescriptorLayerKind::kRelu;
        layer.id = "relu" + std::to_string(++n_relu);
      } else {
        layer.kind = DescriptorLayerKind::kPool;
        layer.pool = tag == kTagPoolMax ? PoolKind::kMax : PoolKind::kAverage;
        layer.id = "pool" + std::to_string(++n_pool);
      }
    } else {
      throw FormatError("'" + path + "': unknown layer tag " + std::to_string(tag));
    }
    net.layers.push_back(std::move(layer));
  }
  if (!in.at_end()) throw FormatError("'" + path + "': trailing bytes after last layer");
  try {
    net.validate();
  } catch (const Error& e) {
    throw FormatError("'" + path + "': inconsistent layers: " + e.what());
  }
  return net;
}

template <typename T>
DescriptorNet<T> load_weights_into(const DescriptorNet<T>& arch, const std::string& path) {
  DescriptorNet<T> loaded = load_weights<T>(path);
  if (loaded.layers.size() != arch.layers.size()) {
    throw FormatError("'" + path + "' has " + std::to_string(loaded.layers.size()) +
                      " layers, architecture has " + std::to_string(arch.layers.size()));
  }
  DescriptorNet<T> net = arch;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& dst = net.layers[i];
    const auto& src = loaded.layers[i];
    if (tag_of(dst) != tag_of(src)) {
      throw FormatError("'" + path + "': layer " + std::to_string(i) + " ('" + dst.id +
                        "') has a different kind");
    }
    if (dst.kind == DescriptorLayerKind::kConv) {
      if (dst.conv.weight.shape() != src.conv.weight.shape()) {
        throw FormatError("'" + path + "': layer '" + dst.id + "' weight shape " +
                          shape_string(src.conv.weight.shape()) + " vs " +
                          shape_string(dst.conv.weight.shape()));
      }
      dst.conv.weight = src.conv.weight;
      dst.conv.bias = src.conv.bias;
    }
  }
  net.validate();
  return net;
}

#define TXN_INSTANTIATE_DESCRIPTOR(T)                                                   \
  template class DescriptorNet<T>;                                                      \
  template void init_orthonormal<T>(ConvSpec<T>&, std::uint64_t);                       \
  template void save_weights<T>(const DescriptorNet<T>&, const std::string&);           \
  template DescriptorNet<T> load_weights<T>(const std::string&);                        \
  template DescriptorNet<T> load_weights_into<T>(const DescriptorNet<T>&, const std::string&);

TXN_INSTANTIATE_DESCRIPTOR(float)
TXN_INSTANTIATE_DESCRIPTOR(double)

template DescriptorNet<double> DescriptorNet<float>::cast<double>() const;
template DescriptorNet<float> DescriptorNet<double>::cast<float>() const;
template DescriptorNet<float> DescriptorNet<float>::cast<float>() const;
template DescriptorNet<double> DescriptorNet<double>::cast<double>() const;

#undef TXN_INSTANTIATE_DESCRIPTOR

}  // namespace txn
