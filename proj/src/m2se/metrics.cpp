#include "m2se/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "m2se/error.hpp"

namespace m2se {

Matrix mel_cepstrum(const Matrix& log_mel, std::size_t order) {
  const std::size_t n = log_mel.cols();
  require(order >= 1 && order < n, ErrorCode::kInvalidArgument,
          "cepstral order must be below the number of mel bands");
  Matrix basis(order, n);
  const double s = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t c = 1; c <= order; ++c)
    for (std::size_t k = 0; k < n; ++k)
      basis(c - 1, k) = s * std::cos(std::numbers::pi * static_cast<double>(c) *
                                     (2.0 * static_cast<double>(k) + 1.0) /
                                     (2.0 * static_cast<double>(n)));
  return matmul_nt(log_mel, basis);
}

namespace {

double frame_distance(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

DtwResult dtw_align(const Matrix& a, const Matrix& b) {
  require(a.rows() >= 1 && b.rows() >= 1, ErrorCode::kInvalidArgument,
          "DTW needs non-empty sequences");
  require(a.cols() == b.cols(), ErrorCode::kDimensionMismatch,
          "DTW sequences differ in feature width");
  const std::size_t n = a.rows(), m = b.rows();
  const double inf = std::numeric_limits<double>::infinity();
  Matrix cost(n, m);
  Matrix acc(n, m, inf);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      cost(i, j) = frame_distance(a, i, b, j);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = inf;
        if (i > 0 && j > 0) best = acc(i - 1, j - 1);
        if (i > 0) best = std::min(best, acc(i - 1, j));
        if (j > 0) best = std::min(best, acc(i, j - 1));
      }
      acc(i, j) = cost(i, j) + best;
    }
  }

  DtwResult r;
  r.total_cost = acc(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  r.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = acc(i - 1, j - 1);
      const double up = acc(i - 1, j);
      const double left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    r.path.emplace_back(i, j);
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

double mcd(const MelSpectrogram& reference, const MelSpectrogram& synthesized) {
  require(reference.config == synthesized.config, ErrorCode::kDimensionMismatch,
          "mel spectrograms were computed with different configurations");
  require(reference.frames.rows() >= 1 && synthesized.frames.rows() >= 1,
          ErrorCode::kInvalidArgument, "mel spectrograms must be non-empty");
  const Matrix a = mel_cepstrum(reference.frames);
  const Matrix b = mel_cepstrum(synthesized.frames);
  const DtwResult r = dtw_align(a, b);
  double total = 0.0;
  for (const auto& [i, j] : r.path) total += frame_distance(a, i, b, j);
  return kMcdScale * total / static_cast<double>(r.path.size());
}

Rt60Fit schroeder_fit(const Waveform& w, const Rt60Options& opts) {
  validate(w);
  require(opts.fit_start_db < 0.0 && opts.fit_end_db < opts.fit_start_db,
          ErrorCode::kInvalidArgument, "fit window must satisfy end < start < 0 dB");
  const std::size_t n = w.samples.size();
  require(n >= 2, ErrorCode::kEstimationFailed, "signal too short for RT60 estimation");

  std::vector<double> edc(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double s = w.samples[i];
    acc += s * s;
    edc[i] = acc;
  }
  require(edc[0] > 0.0, ErrorCode::kEstimationFailed, "signal is silent");

  const double total = edc[0];
  std::size_t begin = n, end = n;
  for (std::size_t i = 0; i < n; ++i) {
    const double db = edc[i] > 0.0 ? 10.0 * std::log10(edc[i] / total)
                                   : -std::numeric_limits<double>::infinity();
    if (begin == n && db <= opts.fit_start_db) begin = i;
    if (db <= opts.fit_end_db) {
      end = i;
      break;
    }
  }
  require(begin < n && end < n && end > begin + 2, ErrorCode::kEstimationFailed,
          "decay curve never spans the fit window");

  // Least squares of level (dB) against time over [begin, end].
  const double rate = static_cast<double>(w.sample_rate);
  const std::size_t count = end - begin + 1;
  double st = 0.0, sy = 0.0;
  for (std::size_t i = begin; i <= end; ++i) {
    st += static_cast<double>(i) / rate;
    sy += 10.0 * std::log10(edc[i] / total);
  }
  const double mt = st / static_cast<double>(count);
  const double my = sy / static_cast<double>(count);
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = begin; i <= end; ++i) {
    const double dt = static_cast<double>(i) / rate - mt;
    const double dy = 10.0 * std::log10(edc[i] / total) - my;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  Rt60Fit fit;
  fit.slope_db_per_s = sty / stt;
  fit.r2 = syy > 0.0 ? (sty * sty) / (stt * syy) : 0.0;
  fit.fit_begin = begin;
  fit.fit_end = end;
  require(fit.slope_db_per_s < 0.0, ErrorCode::kEstimationFailed, "decay slope is not negative");
  if (fit.r2 < opts.min_r2) {
    fail(ErrorCode::kEstimationFailed,
         "decay curve is not exponential (r^2 = " + std::to_string(fit.r2) + ")");
  }
  fit.rt60 = 60.0 / std::abs(fit.slope_db_per_s);
  return fit;
}

double schroeder_rt60(const Waveform& w, const Rt60Options& opts) {
  return schroeder_fit(w, opts).rt60;
}

double rte(const Waveform& reference, const Waveform& synthesized, const Rt60Options& opts) {
  return std::abs(schroeder_rt60(synthesized, opts) - schroeder_rt60(reference, opts));
}

MetricRow evaluate_pair(const std::string& sample_id, const Waveform& reference,
                        const Waveform& synthesized, const MelConfig& cfg,
                        const Rt60Options& opts) {
  require(reference.sample_rate == synthesized.sample_rate, ErrorCode::kDimensionMismatch,
          sample_id + ": reference and synthesized sample rates differ");
  MetricRow row;
  row.sample_id = sample_id;
  try {
    row.rt60_ref = schroeder_rt60(reference, opts);
    row.rt60_syn = schroeder_rt60(synthesized, opts);
    row.rte = std::abs(*row.rt60_syn - *row.rt60_ref);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEstimationFailed) throw;
    row.note = std::string("rt60: ") + e.what();
  }
  row.mcd = mcd(mel_spectrogram(reference, cfg), mel_spectrogram(synthesized, cfg));
  return row;
}

MetricReport aggregate(std::vector<MetricRow> rows) {
  MetricReport r;
  std::sort(rows.begin(), rows.end(),
            [](const MetricRow& a, const MetricRow& b) { return a.sample_id < b.sample_id; });
  for (const MetricRow& row : rows) {
    if (row.rte) {
      r.mean_rte += *row.rte;
      ++r.rte_count;
    } else {
      ++r.skipped;
    }
    if (row.mcd) {
      r.mean_mcd += *row.mcd;
      ++r.mcd_count;
    }
  }
  if (r.rte_count) r.mean_rte /= static_cast<double>(r.rte_count);
  if (r.mcd_count) r.mean_mcd /= static_cast<double>(r.mcd_count);
  r.rows = std::move(rows);
  return r;
}

}  // namespace m2se
