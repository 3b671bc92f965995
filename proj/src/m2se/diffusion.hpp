#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "m2se/attention.hpp"
#include "m2se/checkpoint.hpp"
#include "m2se/feature_io.hpp"
#include "m2se/global_fusion.hpp"
#include "m2se/matrix.hpp"
#include "m2se/spectral.hpp"

namespace m2se {

inline constexpr std::size_t kDefaultSteps = 100;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.06;
inline constexpr std::size_t kDefaultDenoiserHidden = 384;

struct DiffusionSchedule {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  std::size_t t_max() const noexcept { return beta.size(); }
};

// beta[i] = beta_start + i * (beta_end - beta_start) / (t_max - 1)
DiffusionSchedule build_schedule(std::size_t t_max = kDefaultSteps,
                                 double beta_start = kDefaultBetaStart,
                                 double beta_end = kDefaultBetaEnd);

// sqrt(alpha_bar[t]) * x0 + sqrt(1 - alpha_bar[t]) * noise, t zero-based.
Matrix q_sample(const Matrix& x0, std::size_t t, const Matrix& noise,
                const DiffusionSchedule& schedule);

// Residual MLP noise predictor:
//   h0 = in(x_t) + time[t] + cond(h_v)
//   h1 = h0 + tanh(hidden1(h0))
//   h2 = h1 + tanh(hidden2(h1))
//   eps = out(h2)
struct DenoiserParams {
  Matrix time_embed;  // t_max x d_hidden
  LinearParams input;    // patch -> d_hidden
  LinearParams cond;     // d_model -> d_hidden
  LinearParams hidden1;  // d_hidden -> d_hidden
  LinearParams hidden2;
  LinearParams output;   // d_hidden -> patch

  std::size_t patch_size() const noexcept { return input.d_in(); }
  std::size_t d_hidden() const noexcept { return input.d_out(); }
  std::size_t d_model() const noexcept { return cond.d_in(); }
  std::size_t t_max() const noexcept { return time_embed.rows(); }

  // Xavier layers, sinusoidal initial time table.
  static DenoiserParams init(std::size_t patch_size, std::size_t d_hidden, std::size_t d_model,
                             std::size_t t_max, std::uint64_t seed);
};

void append_tensors(std::vector<NamedTensor>& out, const std::string& prefix,
                    DenoiserParams& p);

struct DenoiserCache {
  std::size_t t = 0;
  Matrix x_t, h_v, h0, h1, a1, a2;
};

Matrix denoiser_forward(const Matrix& x_t, std::size_t t, const Matrix& h_v,
                        const DenoiserParams& p, DenoiserCache* cache = nullptr);

// Accumulates parameter gradients and returns d(loss)/d(h_v).
Matrix denoiser_backward(const DenoiserCache& cache, const DenoiserParams& p,
                         const Matrix& d_eps, DenoiserParams& grad);

struct ToyConfig {
  std::size_t k = 3;
  TopkMode mode = TopkMode::kShared;
  std::size_t patch_frames = 2;
  std::size_t patch_bins = 4;
  std::size_t d_hidden = 16;
  std::size_t t_max = kDefaultSteps;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;

  std::size_t patch_size() const noexcept { return patch_frames * patch_bins; }
};

// Conditioning pipeline plus denoiser, trained jointly.
struct ToyModel {
  ToyConfig config;
  PipelineParams pipeline;
  DenoiserParams denoiser;

  static ToyModel init(const ToyConfig& config, const PipelineConfig& pipeline_config,
                       std::uint64_t seed);
  DiffusionSchedule schedule() const;
};

std::vector<NamedTensor> named_tensors(ToyModel& model);
ToyModel zeros_like(const ToyModel& model);

Checkpoint to_checkpoint(const ToyModel& model);
ToyModel toy_model_from_checkpoint(const Checkpoint& ck);

struct ToySample {
  BundleTensors features;
  Matrix target;  // 1 x patch_size, values in [-1, 1], frame-major
};

// Decaying log-energy patch whose decay rate is a function of the bundle's
// caption feature, so the target depends on the conditioning input.
Matrix toy_target(const FeatureBundle& bundle, std::size_t frames, std::size_t bins);

// `count` planted bundles (seeds seed, seed + 1, ...) with their targets.
std::vector<ToySample> make_toy_dataset(std::uint64_t seed, std::size_t count, std::size_t m,
                                        std::size_t d, const ToyConfig& config);

// Noise-prediction MSE for a single (sample, t, noise) draw.
double toy_loss(const ToyModel& model, const ToySample& sample, std::size_t t,
                const Matrix& noise, const DiffusionSchedule& schedule);
// Same loss, accumulating its gradient w.r.t. every model tensor into grad
// (scaled by `weight`).
double toy_loss_and_grad(const ToyModel& model, const ToySample& sample, std::size_t t,
                         const Matrix& noise, const DiffusionSchedule& schedule, double weight,
                         ToyModel& grad);

struct TrainOptions {
  std::size_t steps = 300;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;
  // Fixed (t, noise) draws per sample used to report the loss curve.
  std::size_t eval_draws = 4;
};

struct TrainResult {
  ToyModel model;
  // losses[i]: evaluation-set MSE before update i.
  std::vector<double> losses;
};

// Plain SGD on the full dataset each step (fresh t and noise per sample per
// step) with global gradient-norm clipping.
TrainResult train_toy(const std::vector<ToySample>& dataset, ToyModel model,
                      const TrainOptions& options);

// Ancestral DDPM reverse loop from Gaussian noise (sigma_t^2 = beta_t),
// conditioned on the bundle's environment embedding. Returns
// patch_frames x patch_bins.
Matrix sample_toy(const ToyModel& model, const FeatureBundle& bundle,
                  const DiffusionSchedule& schedule, std::uint64_t seed);
// Same, with the conditioning vector supplied directly.
Matrix sample_toy_conditioned(const ToyModel& model, const Matrix& h_v,
                              const DiffusionSchedule& schedule, std::uint64_t seed);

// Expands a patch to a listenable log-mel spectrogram: values in [-1, 1] map
// affinely to log magnitudes in [-9, 1], bands are interpolated to
// cfg.n_mels, and each frame is repeated frame_repeat times.
MelSpectrogram patch_to_mel(const Matrix& patch, std::size_t frame_repeat, const MelConfig& cfg);

}  // namespace m2se
