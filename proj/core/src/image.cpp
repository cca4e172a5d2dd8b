#include "txn/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "txn/error.hpp"

namespace txn {
namespace {

class HeaderCursor {
 public:
  explicit HeaderCursor(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000) throw FormatError(std::string("PPM ") + what + " is implausibly large");
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("PPM header: missing ") + what);
    return v;
  }

  std::size_t pos_ = 0;

 private:
  const std::vector<std::uint8_t>& bytes_;
};

}  // namespace

ImageRGB::ImageRGB(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) throw ShapeError("image extents must be >= 1");
  pixels.assign(3 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
}

ImageRGB decode_ppm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw FormatError("not a binary PPM (expected magic P6)");
  }
  HeaderCursor cur(bytes);
  cur.pos_ = 2;
  if (cur.pos_ < bytes.size() && !std::isspace(bytes[cur.pos_]) && bytes[cur.pos_] != '#') {
    throw FormatError("malformed PPM header after magic");
  }
  const long w = cur.number("width");
  const long h = cur.number("height");
  const long maxval = cur.number("maxval");
  if (w < 1 || h < 1) throw FormatError("PPM extents must be positive");
  if (maxval != 255) throw FormatError("PPM maxval " + std::to_string(maxval) + " unsupported (need 255)");
  if (cur.pos_ >= bytes.size() || !std::isspace(bytes[cur.pos_])) {
    throw FormatError("malformed PPM header: no whitespace before pixel data");
  }
  ++cur.pos_;
  ImageRGB img(static_cast<int>(w), static_cast<int>(h));
  if (bytes.size() - cur.pos_ < img.pixels.size()) {
    throw TruncationError("PPM payload is short: " + std::to_string(bytes.size() - cur.pos_) +
                          " of " + std::to_string(img.pixels.size()) + " bytes");
  }
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos_), img.pixels.size(), img.pixels.begin());
  return img;
}

ImageRGB read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_ppm(bytes);
  } catch (const FormatError& e) {
    if (dynamic_cast<const TruncationError*>(&e) != nullptr) throw TruncationError("'" + path + "': " + e.what());
    throw FormatError("'" + path + "': " + e.what());
  }
}

std::vector<std::uint8_t> encode_ppm(const ImageRGB& image) {
  if (image.pixels.size() != 3 * static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height) ||
      image.width < 1 || image.height < 1) {
    throw ShapeError("image buffer does not match its extents");
  }
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

void write_ppm(const ImageRGB& image, const std::string& path) {
  const auto bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::uint8_t quantize(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

template <typename T>
Tensor<T> image_to_tensor(const ImageRGB& image) {
  const auto plane = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
  std::vector<T> values(3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      values[c * plane + p] = static_cast<T>(image.pixels[3 * p + c]) / T{255};
    }
  }
  return Tensor<T>::from_data({1, 3, image.height, image.width}, std::move(values));
}

template <typename T>
ImageRGB tensor_to_image(const Tensor<T>& tensor, Index batch_index) {
  if (tensor.rank() != 4 || tensor.dim(1) != 3 || batch_index < 0 || batch_index >= tensor.dim(0)) {
    throw ShapeError("tensor_to_image: expected [B,3,H,W], got " + shape_string(tensor.shape()));
  }
  ImageRGB img(static_cast<int>(tensor.dim(3)), static_cast<int>(tensor.dim(2)));
  const auto plane = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  const auto d = tensor.data();
  const std::size_t base = static_cast<std::size_t>(batch_index) * 3 * plane;
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      img.pixels[3 * p + c] = quantize(static_cast<double>(d[base + c * plane + p]));
    }
  }
  return img;
}

ImageRGB checkerboard(int width, int height, int cell, std::array<std::uint8_t, 3> a,
                      std::array<std::uint8_t, 3> b) {
  if (cell < 1) throw ShapeError("checkerboard cell must be >= 1");
  ImageRGB img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto& c = ((x / cell + y / cell) % 2 == 0) ? a : b;
      std::copy(c.begin(), c.end(), img.at(x, y));
    }
  }
  return img;
}

template Tensor<float> image_to_tensor<float>(const ImageRGB&);
template Tensor<double> image_to_tensor<double>(const ImageRGB&);
template ImageRGB tensor_to_image<float>(const Tensor<float>&, Index);
template ImageRGB tensor_to_image<double>(const Tensor<double>&, Index);

}  // namespace txn
