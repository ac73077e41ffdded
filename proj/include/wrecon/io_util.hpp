#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wrecon {

/// Malformed or truncated input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Little-endian encoding helpers.
void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);
void put_f32s(std::string& out, std::span<const float> v);

/// Sequential little-endian reader over an in-memory buffer; every read is
/// bounds-checked and throws FormatError on truncation.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string context) : bytes_(bytes), context_(std::move(context)) {}

  std::uint32_t u32();
  std::string_view take(std::size_t n);
  void f32s(std::span<float> out);
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string context_;
};

}  // namespace wrecon
