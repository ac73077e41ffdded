#include "wrecon/io_util.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace wrecon {

static_assert(std::endian::native == std::endian::little, "byte-order helpers assume a little-endian host");

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot move output into place at '" + path.string() + "'");
  }
}

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_f32(std::string& out, float v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_f32s(std::string& out, std::span<const float> v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  std::memcpy(&v, take(4).data(), 4);
  return v;
}

std::string_view ByteReader::take(std::size_t n) {
  if (n > remaining()) {
    throw FormatError(context_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ", " + std::to_string(remaining()) + " left)");
  }
  auto s = bytes_.substr(pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::f32s(std::span<float> out) {
  auto s = take(out.size() * sizeof(float));
  std::memcpy(out.data(), s.data(), s.size());
}

}  // namespace wrecon
