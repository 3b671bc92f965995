#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "m2se/error.hpp"

// Little-endian primitives shared by the bundle, checkpoint and mel formats.
namespace m2se::binary {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) fail(ErrorCode::kIo, "write failed");
    count_ += n;
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    bytes(b, 4);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f32s(std::span<const float> v) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(v.data(), v.size() * sizeof(float));
    } else {
      for (float x : v) f32(x);
    }
  }
  void string(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  std::uint64_t count() const noexcept { return count_; }

 private:
  std::ostream& out_;
  std::uint64_t count_ = 0;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* data, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      fail(ErrorCode::kTruncated, std::string("truncated stream while reading ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    std::uint8_t v = 0;
    bytes(&v, 1, what);
    return v;
  }
  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::vector<float> f32s(std::size_t n, const char* what) {
    std::vector<float> v(n);
    if constexpr (std::endian::native == std::endian::little) {
      bytes(v.data(), n * sizeof(float), what);
    } else {
      for (float& x : v) x = std::bit_cast<float>(u32(what));
    }
    return v;
  }
  std::string string(const char* what, std::uint32_t max_len = 1u << 24) {
    const std::uint32_t len = u32(what);
    if (len > max_len) fail(ErrorCode::kTruncated, std::string("implausible length for ") + what);
    std::string s(len, '\0');
    bytes(s.data(), len, what);
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace m2se::binary
