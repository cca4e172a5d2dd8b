#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "txn/generator.hpp"
#include "txn/random.hpp"

namespace txn::testing {

inline std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("txn_test_" + name)).string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Cyclic shift of every [H,W] plane by (sy, sx).
template <typename T>
Tensor<T> roll(const Tensor<T>& x, Index sy, Index sx) {
  const auto planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  for (Index p = 0; p < planes; ++p)
    for (Index y = 0; y < h; ++y)
      for (Index xx = 0; xx < w; ++xx)
        out[static_cast<std::size_t>((p * h + (y + sy) % h) * w + (xx + sx) % w)] =
            x.data()[static_cast<std::size_t>((p * h + y) * w + xx)];
  return Tensor<T>::from_data(x.shape(), std::move(out));
}

/// Shifts the finest noise by (sy, sx) and every coarser scale by the
/// correspondingly halved amount.
template <typename T>
NoiseStack<T> roll_noise(const NoiseStack<T>& z, Index sy, Index sx) {
  NoiseStack<T> out;
  const int k = z.scales();
  for (int i = 0; i < k; ++i) {
    const Index f = Index{1} << (k - 1 - i);
    out.z.push_back(roll(z.z[static_cast<std::size_t>(i)], sy / f, sx / f));
  }
  return out;
}

/// Random affine batch-norm parameters and running statistics, so that eval
/// mode is not the identity.
template <typename T>
void randomize_batch_norms(GeneratorParams<T>& params, Rng& rng) {
  for (auto* bn : params.batch_norms()) {
    for (auto& v : bn->gamma.mutable_data()) v = static_cast<T>(rng.uniform(0.5, 1.5));
    for (auto& v : bn->beta.mutable_data()) v = static_cast<T>(rng.uniform(-0.5, 0.5));
    for (auto& v : bn->running_mean.mutable_data()) v = static_cast<T>(rng.uniform(-0.5, 0.5));
    for (auto& v : bn->running_var.mutable_data()) v = static_cast<T>(rng.uniform(0.5, 2.0));
  }
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace txn::testing
