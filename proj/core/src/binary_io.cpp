#include "txn/binary_io.hpp"

#include <bit>
#include <iterator>

namespace txn::io {

BinaryWriter::BinaryWriter(const std::string& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot open '" + path + "' for writing");
}

void BinaryWriter::bytes(std::span<const std::uint8_t> data) {
  out_.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void BinaryWriter::u32(std::uint32_t v) {
  const std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                             static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  bytes(b);
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::finish() {
  out_.flush();
  if (!out_) throw IoError("write to '" + path_ + "' failed");
  out_.close();
}

BinaryReader::BinaryReader(const std::string& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void BinaryReader::require(std::size_t n) const {
  if (remaining() < n) {
    throw TruncationError("'" + path_ + "' is truncated at byte " + std::to_string(data_.size()));
  }
}

void BinaryReader::expect_magic(std::string_view m, std::string_view what) {
  if (remaining() < m.size() || std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0) {
    throw FormatError("'" + path_ + "' is not a " + std::string(what) + " file (bad magic)");
  }
  pos_ += m.size();
}

std::uint8_t BinaryReader::u8() {
  require(1);
  return data_[pos_++];
}

std::uint32_t BinaryReader::u32() {
  require(4);
  const std::uint32_t v = static_cast<std::uint32_t>(data_[pos_]) |
                          (static_cast<std::uint32_t>(data_[pos_ + 1]) << 8) |
                          (static_cast<std::uint32_t>(data_[pos_ + 2]) << 16) |
                          (static_cast<std::uint32_t>(data_[pos_ + 3]) << 24);
  pos_ += 4;
  return v;
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }

}  // namespace txn::io
