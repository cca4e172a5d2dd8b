#include <doctest.h>

#include "support.hpp"
#include "txn/error.hpp"
#include "txn/image.hpp"
#include "txn/ops.hpp"

using namespace txn;
using txn::testing::read_file;
using txn::testing::temp_path;

namespace {

ImageRGB random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  ImageRGB img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("ppm round-trips bitwise") {
  const auto img = random_image(7, 5, 1);
  const auto path = temp_path("img.ppm");
  write_ppm(img, path);
  const auto back = read_ppm(path);
  CHECK(back == img);
  write_ppm(back, path + "2");
  CHECK(read_file(path) == read_file(path + "2"));
  const auto enc = encode_ppm(img);
  CHECK(std::string(enc.begin(), enc.begin() + 11) == "P6\n7 5\n255\n");
  CHECK(enc.size() == 11 + 3 * 7 * 5);
}

TEST_CASE("ppm header parsing") {
  auto img = decode_ppm(bytes_of("P6 # comment\n2 # width done\n1\n255\n\x01\x02\x03\x04\x05\x06"));
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.at(1, 0)[2] == 6);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P3\n1 1\n255\n1 2 3")), FormatError);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n1 1\n65535\n\x01\x02\x03")), FormatError);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n0 1\n255\n")), FormatError);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n2 2\n255\n\x01\x02\x03")), TruncationError);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n")), FormatError);
  CHECK_THROWS_AS(read_ppm(temp_path("does_not_exist.ppm")), IoError);
}

TEST_CASE("tensor conversion and quantization") {
  CHECK(quantize(-0.3) == 0);
  CHECK(quantize(1.7) == 255);
  CHECK(quantize(0.5) == 128);
  CHECK(quantize(1.0 / 255.0) == 1);
  CHECK(quantize(0.49 / 255.0) == 0);
  CHECK(quantize(0.5 / 255.0) == 1);

  const auto img = random_image(4, 3, 2);
  const auto t = image_to_tensor<float>(img);
  CHECK(t.shape() == Shape{1, 3, 3, 4});
  CHECK(t.at({0, 1, 2, 3}) == static_cast<float>(img.at(3, 2)[1]) / 255.0f);
  CHECK(tensor_to_image(t) == img);
  CHECK(tensor_to_image(image_to_tensor<double>(img)) == img);

  auto batch = concat_batch<float>({Tensor<float>::zeros({1, 3, 3, 4}), t});
  CHECK(tensor_to_image(batch, 1) == img);
  CHECK_THROWS_AS(tensor_to_image(Tensor<float>::zeros({1, 1, 3, 4})), ShapeError);
}

TEST_CASE("checkerboard") {
  const auto cb = checkerboard(8, 4, 2, {10, 20, 30}, {40, 50, 60});
  CHECK(cb.at(0, 0)[0] == 10);
  CHECK(cb.at(2, 0)[0] == 40);
  CHECK(cb.at(2, 2)[0] == 10);
  CHECK(cb.at(1, 3)[2] == 60);
  CHECK_THROWS_AS(checkerboard(4, 4, 0, {0, 0, 0}, {0, 0, 0}), ShapeError);
}
