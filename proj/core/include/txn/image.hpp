#pragma once

// 8-bit RGB images, binary PPM (P6) codec and tensor conversion.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "txn/tensor.hpp"

namespace txn {

struct ImageRGB {
  int width = 0;
  int height = 0;
  /// Row-major RGB triples, 3 * width * height bytes.
  std::vector<std::uint8_t> pixels;

  ImageRGB() = default;
  ImageRGB(int w, int h);

  std::uint8_t* at(int x, int y) { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
  bool operator==(const ImageRGB&) const = default;
};

/// Reads P6 with maxval 255; '#' comments are allowed in the header.
ImageRGB read_ppm(const std::string& path);
ImageRGB decode_ppm(const std::vector<std::uint8_t>& bytes);
void write_ppm(const ImageRGB& image, const std::string& path);
std::vector<std::uint8_t> encode_ppm(const ImageRGB& image);

/// Byte b maps to b/255, as a [1,3,H,W] tensor.
template <typename T>
Tensor<T> image_to_tensor(const ImageRGB& image);

/// Clamps to [0,1] and rounds half up: byte = floor(255 v + 0.5).
template <typename T>
ImageRGB tensor_to_image(const Tensor<T>& tensor, Index batch_index = 0);

std::uint8_t quantize(double v);

/// Two-tone checkerboard with square side `cell`.
ImageRGB checkerboard(int width, int height, int cell, std::array<std::uint8_t, 3> a,
                      std::array<std::uint8_t, 3> b);

}  // namespace txn
