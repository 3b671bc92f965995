#include "m2se/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "m2se/error.hpp"

namespace m2se {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

void validate(const Waveform& w) {
  require(w.sample_rate > 0, ErrorCode::kInvalidArgument, "sample rate must be positive");
  for (float s : w.samples) {
    require(std::isfinite(s), ErrorCode::kNonFinite, "waveform contains non-finite samples");
  }
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    fail(ErrorCode::kBadMagic, name + " is not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    const std::uint32_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > buf.size()) fail(ErrorCode::kTruncated, name + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) fail(ErrorCode::kTruncated, name + ": short fmt chunk");
      format = le16(buf.data() + body);
      channels = le16(buf.data() + body + 2);
      rate = le32(buf.data() + body + 4);
      bits = le16(buf.data() + body + 14);
      if (format == kFormatExtensible && len >= 26) format = le16(buf.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = buf.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);
  }
  if (format == 0) fail(ErrorCode::kTruncated, name + ": missing fmt chunk");
  if (!data) fail(ErrorCode::kTruncated, name + ": missing data chunk");
  if (channels != 1) {
    fail(ErrorCode::kInvalidArgument,
         name + ": only mono audio is supported (found " + std::to_string(channels) +
             " channels)");
  }

  Waveform w;
  w.sample_rate = rate;
  if (format == kFormatPcm && bits == 16) {
    w.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      const auto v = static_cast<std::int16_t>(le16(data + 2 * i));
      w.samples[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (format == kFormatFloat && bits == 32) {
    w.samples.resize(data_len / 4);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      w.samples[i] = std::bit_cast<float>(le32(data + 4 * i));
    }
  } else {
    fail(ErrorCode::kInvalidArgument, name + ": unsupported sample format (format " +
                                          std::to_string(format) + ", " +
                                          std::to_string(bits) + " bits)");
  }
  validate(w);
  return w;
}

void write_wav(const Waveform& w, const std::filesystem::path& path, WavFormat format) {
  validate(w);
  const bool pcm = format == WavFormat::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t bytes_per_sample = bits / 8;
  const auto data_len = static_cast<std::uint32_t>(w.samples.size() * bytes_per_sample);

  std::string s;
  s.reserve(44 + data_len);
  s += "RIFF";
  put32(s, 36 + data_len);
  s += "WAVEfmt ";
  put32(s, 16);
  put16(s, pcm ? kFormatPcm : kFormatFloat);
  put16(s, 1);
  put32(s, w.sample_rate);
  put32(s, w.sample_rate * bytes_per_sample);
  put16(s, static_cast<std::uint16_t>(bytes_per_sample));
  put16(s, bits);
  s += "data";
  put32(s, data_len);
  for (float x : w.samples) {
    if (pcm) {
      const double clipped = std::clamp(static_cast<double>(x), -1.0, 1.0);
      const auto v = static_cast<std::int16_t>(std::lround(clipped * 32767.0));
      put16(s, static_cast<std::uint16_t>(v));
    } else {
      put32(s, std::bit_cast<std::uint32_t>(x));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace m2se
