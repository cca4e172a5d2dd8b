#pragma once

// Little-endian binary container helpers shared by the weight and
// parameter file formats.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "txn/error.hpp"

namespace txn::io {

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);

  void bytes(std::span<const std::uint8_t> data);
  void magic(std::string_view m) { bytes({reinterpret_cast<const std::uint8_t*>(m.data()), m.size()}); }
  void u8(std::uint8_t v) { bytes({&v, 1}); }
  void u32(std::uint32_t v);
  void f32(float v);
  template <typename T>
  void f32_array(std::span<const T> values) {
    for (const T v : values) f32(static_cast<float>(v));
  }
  /// Flushes and closes; throws IoError if any write failed.
  void finish();

 private:
  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);

  /// Throws FormatError unless the next bytes equal `m`.
  void expect_magic(std::string_view m, std::string_view what);
  std::uint8_t u8();
  std::uint32_t u32();
  float f32();
  template <typename T>
  std::vector<T> f32_array(std::size_t n) {
    require(4 * n);
    std::vector<T> out(n);
    for (auto& v : out) v = static_cast<T>(f32());
    return out;
  }
  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& path() const { return path_; }

 private:
  void require(std::size_t n) const;

  std::string path_;
  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace txn::io
