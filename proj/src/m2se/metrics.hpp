#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "m2se/audio.hpp"
#include "m2se/matrix.hpp"
#include "m2se/spectral.hpp"

namespace m2se {

inline constexpr std::size_t kCepstralOrder = 13;

// 10 * sqrt(2) / ln(10)
inline const double kMcdScale = 10.0 * std::sqrt(2.0) / std::log(10.0);

// Orthonormal DCT-II of each log-mel frame, keeping c1..c_order (c0 dropped).
Matrix mel_cepstrum(const Matrix& log_mel, std::size_t order = kCepstralOrder);

struct DtwResult {
  std::vector<std::pair<std::size_t, std::size_t>> path;  // (ref, syn), increasing
  double total_cost = 0.0;
};

// Euclidean frame distance; steps (1,1), (1,0), (0,1). Ties prefer the diagonal.
DtwResult dtw_align(const Matrix& a, const Matrix& b);

// Mean aligned cepstral distance scaled by kMcdScale, in dB.
double mcd(const MelSpectrogram& reference, const MelSpectrogram& synthesized);

struct Rt60Options {
  double fit_start_db = -5.0;
  double fit_end_db = -25.0;
  // Minimum r^2 of the linear fit; curved decay curves (no exponential tail)
  // are rejected as estimation failures.
  double min_r2 = 0.98;
};

struct Rt60Fit {
  double rt60 = 0.0;
  double slope_db_per_s = 0.0;
  double r2 = 0.0;
  std::size_t fit_begin = 0;
  std::size_t fit_end = 0;
};

// Schroeder backward integration and a least-squares line over the
// fit_start_db..fit_end_db segment, extrapolated to 60 dB of decay.
// Throws Error(kEstimationFailed) when no usable decay exists.
Rt60Fit schroeder_fit(const Waveform& w, const Rt60Options& opts = {});
double schroeder_rt60(const Waveform& w, const Rt60Options& opts = {});

// |rt60(syn) - rt60(ref)|
double rte(const Waveform& reference, const Waveform& synthesized,
           const Rt60Options& opts = {});

struct MetricRow {
  std::string sample_id;
  std::optional<double> rt60_ref;
  std::optional<double> rt60_syn;
  std::optional<double> rte;
  std::optional<double> mcd;
  std::string note;  // why a metric is missing
};

struct MetricReport {
  std::vector<MetricRow> rows;
  double mean_rte = 0.0;
  double mean_mcd = 0.0;
  std::size_t rte_count = 0;
  std::size_t mcd_count = 0;
  std::size_t skipped = 0;  // pairs whose RT60 could not be estimated
};

MetricRow evaluate_pair(const std::string& sample_id, const Waveform& reference,
                        const Waveform& synthesized, const MelConfig& cfg = {},
                        const Rt60Options& opts = {});

// Means over rows that carry each metric.
MetricReport aggregate(std::vector<MetricRow> rows);

}  // namespace m2se
