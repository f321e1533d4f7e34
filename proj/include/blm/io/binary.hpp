#pragma once

// Little-endian byte buffers shared by the checkpoint and embedding-store
// formats.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace blm::io {

class ByteWriter {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v);
  void bytes(std::string_view s) { buf_.append(s); }
  const std::string& buffer() const { return buf_; }

 private:
  void put(std::uint64_t v, int n);
  std::string buf_;
};

// Reads from an in-memory buffer; any read past the end throws FormatError
// naming `source` and the offset.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string source) : data_(data), source_(std::move(source)) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32();
  std::string bytes(std::size_t n);

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::uint64_t get(int n);
  void need(std::size_t n) const;

  std::string_view data_;
  std::string source_;
  std::size_t pos_ = 0;
};

// Whole-file helpers. write_file goes through a temporary sibling and a
// rename so readers never observe a partial file.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace blm::io
