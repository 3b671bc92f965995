#include "m2se/spectral.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>

#include "m2se/binary_io.hpp"
#include "m2se/error.hpp"
#include "m2se/rng.hpp"

namespace m2se {

namespace {

std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

// FFTW's planner is not thread-safe; plans are created under a lock and
// executed with the new-array interface.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), out_, in_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::vector<std::complex<double>> forward(const std::vector<double>& x) {
    std::copy(x.begin(), x.end(), in_);
    fftw_execute(forward_);
    std::vector<std::complex<double>> y(n_ / 2 + 1);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = {out_[k][0], out_[k][1]};
    return y;
  }

  // Unnormalised inverse scaled by 1/n.
  std::vector<double> inverse(const std::vector<std::complex<double>>& y) {
    for (std::size_t k = 0; k < y.size(); ++k) {
      out_[k][0] = y[k].real();
      out_[k][1] = y[k].imag();
    }
    fftw_execute(inverse_);
    std::vector<double> x(in_, in_ + n_);
    const double scale = 1.0 / static_cast<double>(n_);
    for (double& v : x) v *= scale;
    return x;
  }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

void validate(const MelConfig& cfg) {
  require(cfg.sample_rate > 0 && cfg.fft_size >= 2 && cfg.hop >= 1 && cfg.win >= 1 &&
              cfg.win <= cfg.fft_size && cfg.n_mels >= 1 && cfg.log_floor > 0.0,
          ErrorCode::kInvalidArgument, "invalid mel configuration");
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_points_hz(const MelConfig& cfg) {
  const double top = hz_to_mel(cfg.sample_rate / 2.0);
  std::vector<double> hz(cfg.n_mels + 2);
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }
  return hz;
}

}  // namespace

std::vector<double> mel_centres(const MelConfig& cfg) {
  const std::vector<double> pts = mel_points_hz(cfg);
  return {pts.begin() + 1, pts.end() - 1};
}

Matrix mel_filterbank(const MelConfig& cfg) {
  validate(cfg);
  const std::vector<double> pts = mel_points_hz(cfg);
  Matrix fb(cfg.n_mels, cfg.n_bins());
  const double bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.fft_size);
  for (std::size_t b = 0; b < cfg.n_mels; ++b) {
    const double lo = pts[b], mid = pts[b + 1], hi = pts[b + 2];
    for (std::size_t k = 0; k < cfg.n_bins(); ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      fb(b, k) = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

std::vector<double> analysis_window(const MelConfig& cfg) {
  std::vector<double> w(cfg.fft_size, 0.0);
  const std::size_t offset = (cfg.fft_size - cfg.win) / 2;
  for (std::size_t i = 0; i < cfg.win; ++i) {
    w[offset + i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                         static_cast<double>(cfg.win));
  }
  return w;
}

std::size_t frame_count(std::size_t n_samples, const MelConfig& cfg) {
  return (n_samples + cfg.hop - 1) / cfg.hop;
}

ComplexFrames stft(std::span<const float> samples, const MelConfig& cfg) {
  validate(cfg);
  require(!samples.empty(), ErrorCode::kInvalidArgument, "waveform is empty");
  const std::size_t frames = frame_count(samples.size(), cfg);
  const std::vector<double> window = analysis_window(cfg);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(cfg.fft_size / 2);
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  RealFft fft(cfg.fft_size);
  ComplexFrames out(frames);
  std::vector<double> buf(cfg.fft_size);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * cfg.hop) - half;
    for (std::size_t i = 0; i < cfg.fft_size; ++i) {
      const std::ptrdiff_t src = start + static_cast<std::ptrdiff_t>(i);
      buf[i] = (src >= 0 && src < n) ? samples[static_cast<std::size_t>(src)] * window[i] : 0.0;
    }
    out[t] = fft.forward(buf);
  }
  return out;
}

std::vector<double> istft(const ComplexFrames& frames, const MelConfig& cfg, std::size_t length) {
  validate(cfg);
  const std::vector<double> window = analysis_window(cfg);
  const std::size_t half = cfg.fft_size / 2;
  const std::size_t padded = frames.size() * cfg.hop + cfg.fft_size;
  std::vector<double> acc(padded, 0.0), norm(padded, 0.0);
  RealFft fft(cfg.fft_size);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    require(frames[t].size() == cfg.n_bins(), ErrorCode::kDimensionMismatch,
            "STFT frame has the wrong number of bins");
    const std::vector<double> x = fft.inverse(frames[t]);
    const std::size_t start = t * cfg.hop;
    for (std::size_t i = 0; i < cfg.fft_size; ++i) {
      acc[start + i] += x[i] * window[i];
      norm[start + i] += window[i] * window[i];
    }
  }
  std::vector<double> out(length, 0.0);
  for (std::size_t i = 0; i < length && i + half < padded; ++i) {
    const double w = norm[i + half];
    out[i] = w > 1e-8 ? acc[i + half] / w : 0.0;
  }
  return out;
}

Matrix stft_magnitude(std::span<const float> samples, const MelConfig& cfg) {
  const ComplexFrames spec = stft(samples, cfg);
  Matrix mag(spec.size(), cfg.n_bins());
  for (std::size_t t = 0; t < spec.size(); ++t)
    for (std::size_t k = 0; k < cfg.n_bins(); ++k) mag(t, k) = std::abs(spec[t][k]);
  return mag;
}

MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& base) {
  validate(w);
  require(!w.samples.empty(), ErrorCode::kInvalidArgument, "waveform is empty");
  MelConfig cfg = base;
  cfg.sample_rate = w.sample_rate;
  const Matrix mag = stft_magnitude(w.samples, cfg);
  Matrix mel = matmul_nt(mag, mel_filterbank(cfg));
  for (double& v : mel.values()) v = std::log(std::max(v, cfg.log_floor));
  return {cfg, std::move(mel)};
}

MelSpectrogram mel_spectrogram(const Waveform& w) { return mel_spectrogram(w, MelConfig{}); }

void save_mel_file(const MelSpectrogram& mel, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  binary::Writer w(out);
  w.u32(static_cast<std::uint32_t>(mel.frames.rows()));
  w.u32(static_cast<std::uint32_t>(mel.frames.cols()));
  std::vector<float> data(mel.frames.values().begin(), mel.frames.values().end());
  w.f32s(data);
}

MelSpectrogram load_mel_file(const std::filesystem::path& path, const MelConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  binary::Reader r(in);
  const std::uint32_t frames = r.u32("frames");
  const std::uint32_t n_mels = r.u32("n_mels");
  require(static_cast<std::uint64_t>(frames) * n_mels <= (std::uint64_t{1} << 28),
          ErrorCode::kDimensionMismatch, "mel header dimensions too large");
  const std::vector<float> data = r.f32s(static_cast<std::size_t>(frames) * n_mels, "mel");
  require(r.at_end(), ErrorCode::kDimensionMismatch, "trailing bytes after mel payload");
  MelSpectrogram mel{cfg, Matrix::from_floats(frames, n_mels, data)};
  mel.config.n_mels = n_mels;
  require(mel.frames.all_finite(), ErrorCode::kNonFinite, "mel file contains non-finite values");
  return mel;
}

Waveform griffin_lim(const MelSpectrogram& mel, std::size_t iterations, std::uint64_t seed) {
  require(iterations >= 1, ErrorCode::kInvalidArgument, "iterations must be >= 1");
  const MelConfig& cfg = mel.config;
  require(mel.frames.cols() == cfg.n_mels && mel.frames.rows() >= 1,
          ErrorCode::kDimensionMismatch, "mel spectrogram shape does not match its config");

  const Matrix fb = mel_filterbank(cfg);
  Eigen::MatrixXd fb_e(fb.rows(), fb.cols());
  for (std::size_t i = 0; i < fb.rows(); ++i)
    for (std::size_t j = 0; j < fb.cols(); ++j) fb_e(i, j) = fb(i, j);
  const Eigen::MatrixXd pinv = fb_e.completeOrthogonalDecomposition().pseudoInverse();

  const std::size_t frames = mel.frames.rows();
  const std::size_t bins = cfg.n_bins();
  std::vector<std::vector<double>> magnitude(frames, std::vector<double>(bins));
  for (std::size_t t = 0; t < frames; ++t) {
    Eigen::VectorXd energy(cfg.n_mels);
    for (std::size_t b = 0; b < cfg.n_mels; ++b) energy(b) = std::exp(mel.frames(t, b));
    const Eigen::VectorXd lin = pinv * energy;
    for (std::size_t k = 0; k < bins; ++k) magnitude[t][k] = std::max(0.0, lin(k));
  }

  Rng rng(seed);
  ComplexFrames spec(frames, std::vector<std::complex<double>>(bins));
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < bins; ++k)
      spec[t][k] = std::polar(magnitude[t][k], 2.0 * std::numbers::pi * rng.uniform());

  const std::size_t length = frames * cfg.hop;
  std::vector<double> signal = istft(spec, cfg, length);
  std::vector<float> buf(length);
  for (std::size_t it = 1; it < iterations; ++it) {
    std::transform(signal.begin(), signal.end(), buf.begin(),
                   [](double v) { return static_cast<float>(v); });
    const ComplexFrames est = stft(buf, cfg);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < bins; ++k) {
        const double a = std::abs(est[t][k]);
        const std::complex<double> phase = a > 0.0 ? est[t][k] / a : std::complex<double>(1.0);
        spec[t][k] = magnitude[t][k] * phase;
      }
    }
    signal = istft(spec, cfg, length);
  }

  Waveform w;
  w.sample_rate = cfg.sample_rate;
  w.samples.resize(length);
  std::transform(signal.begin(), signal.end(), w.samples.begin(), [](double v) {
    return static_cast<float>(std::clamp(v, -1.0, 1.0));
  });
  return w;
}

}  // namespace m2se
