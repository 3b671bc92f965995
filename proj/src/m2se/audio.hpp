#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace m2se {

inline constexpr std::uint32_t kDefaultSampleRate = 16000;

struct Waveform {
  std::vector<float> samples;  // mono, nominally in [-1, 1]
  std::uint32_t sample_rate = kDefaultSampleRate;

  double duration() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

void validate(const Waveform& w);

enum class WavFormat { kPcm16, kFloat32 };

// Mono PCM16 or float32 only; multi-channel files are rejected.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const Waveform& w, const std::filesystem::path& path,
               WavFormat format = WavFormat::kPcm16);

}  // namespace m2se
