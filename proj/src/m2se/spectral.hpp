#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "m2se/audio.hpp"
#include "m2se/matrix.hpp"

namespace m2se {

struct MelConfig {
  std::uint32_t sample_rate = kDefaultSampleRate;
  std::size_t fft_size = 1024;
  std::size_t hop = 256;
  std::size_t win = 1024;
  std::size_t n_mels = 80;
  double log_floor = 1e-5;

  std::size_t n_bins() const noexcept { return fft_size / 2 + 1; }
  friend bool operator==(const MelConfig&, const MelConfig&) = default;
};

struct MelSpectrogram {
  MelConfig config;
  Matrix frames;  // n_frames x n_mels, natural-log mel magnitudes
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Band centre frequencies (Hz) of the filterbank, length n_mels.
std::vector<double> mel_centres(const MelConfig& cfg);

// n_mels x n_bins triangular filters, HTK mel scale from 0 Hz to Nyquist.
Matrix mel_filterbank(const MelConfig& cfg);

// Periodic Hann window of cfg.win samples, zero-padded and centred to fft_size.
std::vector<double> analysis_window(const MelConfig& cfg);

// ceil(n_samples / hop)
std::size_t frame_count(std::size_t n_samples, const MelConfig& cfg);

using ComplexFrames = std::vector<std::vector<std::complex<double>>>;

// Centre-padded (zeros) STFT; frame t is centred on sample t * hop.
ComplexFrames stft(std::span<const float> samples, const MelConfig& cfg);
// Least-squares overlap-add inverse of stft, `length` samples long.
std::vector<double> istft(const ComplexFrames& frames, const MelConfig& cfg, std::size_t length);

Matrix stft_magnitude(std::span<const float> samples, const MelConfig& cfg);

MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg);
MelSpectrogram mel_spectrogram(const Waveform& w);

// Raw file: frames u32 | n_mels u32 | frames * n_mels f32, row-major, little-endian.
void save_mel_file(const MelSpectrogram& mel, const std::filesystem::path& path);
// The header carries no audio configuration; `cfg` supplies it.
MelSpectrogram load_mel_file(const std::filesystem::path& path, const MelConfig& cfg = {});

// Pseudo-inverse mel to linear magnitude, then Griffin-Lim phase
// reconstruction from a seeded random initial phase. Output is clamped to
// [-1, 1].
Waveform griffin_lim(const MelSpectrogram& mel, std::size_t iterations, std::uint64_t seed);

}  // namespace m2se
