#include "m2se/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "m2se/error.hpp"
#include "m2se/rng.hpp"

namespace m2se {

DiffusionSchedule build_schedule(std::size_t t_max, double beta_start, double beta_end) {
  require(t_max >= 2, ErrorCode::kInvalidArgument, "t_max must be >= 2");
  require(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0,
          ErrorCode::kInvalidArgument, "schedule needs 0 < beta_start < beta_end < 1");
  DiffusionSchedule s;
  s.beta.resize(t_max);
  s.alpha.resize(t_max);
  s.alpha_bar.resize(t_max);
  const double step = (beta_end - beta_start) / static_cast<double>(t_max - 1);
  double prod = 1.0;
  for (std::size_t i = 0; i < t_max; ++i) {
    s.beta[i] = i + 1 == t_max ? beta_end : beta_start + static_cast<double>(i) * step;
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  return s;
}

Matrix q_sample(const Matrix& x0, std::size_t t, const Matrix& noise,
                const DiffusionSchedule& schedule) {
  require(t < schedule.t_max(), ErrorCode::kInvalidArgument,
          "timestep " + std::to_string(t) + " out of range");
  require(x0.same_shape(noise), ErrorCode::kDimensionMismatch,
          "noise shape differs from x0");
  const double a = std::sqrt(schedule.alpha_bar[t]);
  const double b = std::sqrt(1.0 - schedule.alpha_bar[t]);
  Matrix out(x0.rows(), x0.cols());
  auto o = out.values();
  auto x = x0.values();
  auto n = noise.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * x[i] + b * n[i];
  return out;
}

DenoiserParams DenoiserParams::init(std::size_t patch_size, std::size_t d_hidden,
                                    std::size_t d_model, std::size_t t_max,
                                    std::uint64_t seed) {
  require(patch_size >= 1 && d_hidden >= 1 && d_model >= 1 && t_max >= 1,
          ErrorCode::kInvalidArgument, "denoiser dimensions must be positive");
  Rng rng(seed);
  DenoiserParams p;
  p.time_embed = Matrix(t_max, d_hidden);
  for (std::size_t t = 0; t < t_max; ++t) {
    for (std::size_t j = 0; j < d_hidden; ++j) {
      const double freq =
          std::pow(1000.0, -static_cast<double>(j / 2 * 2) / static_cast<double>(d_hidden));
      const double arg = static_cast<double>(t) * freq;
      p.time_embed(t, j) = j % 2 == 0 ? std::sin(arg) : std::cos(arg);
    }
  }
  p.input = LinearParams::xavier(patch_size, d_hidden, rng);
  p.cond = LinearParams::xavier(d_model, d_hidden, rng);
  p.hidden1 = LinearParams::xavier(d_hidden, d_hidden, rng);
  p.hidden2 = LinearParams::xavier(d_hidden, d_hidden, rng);
  p.output = LinearParams::xavier(d_hidden, patch_size, rng);
  return p;
}

void append_tensors(std::vector<NamedTensor>& out, const std::string& prefix,
                    DenoiserParams& p) {
  out.push_back({prefix + ".time_embed", &p.time_embed});
  append_tensors(out, prefix + ".input", p.input);
  append_tensors(out, prefix + ".cond", p.cond);
  append_tensors(out, prefix + ".hidden1", p.hidden1);
  append_tensors(out, prefix + ".hidden2", p.hidden2);
  append_tensors(out, prefix + ".output", p.output);
}

namespace {

Matrix tanh_of(const Matrix& z) {
  Matrix a = z;
  for (double& v : a.values()) v = std::tanh(v);
  return a;
}

Matrix tanh_backward(const Matrix& a, const Matrix& d) {
  Matrix out = d;
  auto o = out.values();
  auto av = a.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= 1.0 - av[i] * av[i];
  return out;
}

}  // namespace

Matrix denoiser_forward(const Matrix& x_t, std::size_t t, const Matrix& h_v,
                        const DenoiserParams& p, DenoiserCache* cache) {
  require(t < p.t_max(), ErrorCode::kInvalidArgument, "timestep out of range");
  require(x_t.rows() == 1 && h_v.rows() == 1, ErrorCode::kDimensionMismatch,
          "denoiser takes single-row inputs");
  Matrix h0 = linear_forward(x_t, p.input);
  h0 += linear_forward(h_v, p.cond);
  for (std::size_t j = 0; j < h0.cols(); ++j) h0(0, j) += p.time_embed(t, j);
  Matrix a1 = tanh_of(linear_forward(h0, p.hidden1));
  Matrix h1 = h0 + a1;
  Matrix a2 = tanh_of(linear_forward(h1, p.hidden2));
  Matrix eps = linear_forward(h1 + a2, p.output);
  if (cache) {
    cache->t = t;
    cache->x_t = x_t;
    cache->h_v = h_v;
    cache->h0 = std::move(h0);
    cache->h1 = std::move(h1);
    cache->a1 = std::move(a1);
    cache->a2 = std::move(a2);
  }
  return eps;
}

Matrix denoiser_backward(const DenoiserCache& c, const DenoiserParams& p, const Matrix& d_eps,
                         DenoiserParams& grad) {
  const Matrix h2 = c.h1 + c.a2;
  const Matrix d_h2 = linear_backward(h2, p.output, d_eps, grad.output);
  Matrix d_h1 = d_h2 + linear_backward(c.h1, p.hidden2, tanh_backward(c.a2, d_h2), grad.hidden2);
  Matrix d_h0 = d_h1 + linear_backward(c.h0, p.hidden1, tanh_backward(c.a1, d_h1), grad.hidden1);
  for (std::size_t j = 0; j < d_h0.cols(); ++j) grad.time_embed(c.t, j) += d_h0(0, j);
  linear_accumulate_grad(c.x_t, d_h0, grad.input);
  return linear_backward(c.h_v, p.cond, d_h0, grad.cond);
}

ToyModel ToyModel::init(const ToyConfig& config, const PipelineConfig& pc, std::uint64_t seed) {
  require(config.patch_frames >= 1 && config.patch_bins >= 1, ErrorCode::kInvalidArgument,
          "patch shape must be positive");
  ToyModel m;
  m.config = config;
  m.pipeline = PipelineParams::xavier(pc, seed);
  m.denoiser = DenoiserParams::init(config.patch_size(), config.d_hidden, pc.d_model,
                                    config.t_max, seed ^ 0x9E3779B97F4A7C15ull);
  return m;
}

DiffusionSchedule ToyModel::schedule() const {
  return build_schedule(config.t_max, config.beta_start, config.beta_end);
}

std::vector<NamedTensor> named_tensors(ToyModel& model) {
  std::vector<NamedTensor> out = named_tensors(model.pipeline);
  for (NamedTensor& t : out) t.name = "pipeline." + t.name;
  append_tensors(out, "denoiser", model.denoiser);
  return out;
}

ToyModel zeros_like(const ToyModel& model) {
  ToyModel z = model;
  for (NamedTensor& t : named_tensors(z)) t.tensor->fill(0.0);
  return z;
}

Checkpoint to_checkpoint(const ToyModel& model) {
  Checkpoint ck;
  append_pipeline(ck, model.pipeline);
  const ToyConfig& c = model.config;
  ck.push_back(scalar_entry("toy.k", static_cast<double>(c.k)));
  ck.push_back(scalar_entry("toy.mode", c.mode == TopkMode::kShared ? 0.0 : 1.0));
  ck.push_back(scalar_entry("toy.patch_frames", static_cast<double>(c.patch_frames)));
  ck.push_back(scalar_entry("toy.patch_bins", static_cast<double>(c.patch_bins)));
  ck.push_back(scalar_entry("toy.d_hidden", static_cast<double>(c.d_hidden)));
  ck.push_back(scalar_entry("toy.t_max", static_cast<double>(c.t_max)));
  ck.push_back({"toy.beta", {2},
                {static_cast<float>(c.beta_start), static_cast<float>(c.beta_end)}});
  ToyModel copy = model;
  std::vector<NamedTensor> tensors;
  append_tensors(tensors, "denoiser", copy.denoiser);
  for (const NamedTensor& t : tensors) ck.push_back(tensor_entry(t.name, *t.tensor));
  return ck;
}

ToyModel toy_model_from_checkpoint(const Checkpoint& ck) {
  const CheckpointIndex idx(ck);
  auto count = [&](const char* name) {
    const double v = idx.scalar(name);
    require(v >= 1 && v == std::floor(v), ErrorCode::kDimensionMismatch,
            std::string(name) + " must be a positive integer");
    return static_cast<std::size_t>(v);
  };
  ToyModel model;
  model.pipeline = pipeline_from_checkpoint(ck);
  ToyConfig& c = model.config;
  c.k = count("toy.k");
  c.mode = idx.scalar("toy.mode") == 0.0 ? TopkMode::kShared : TopkMode::kUnshared;
  c.patch_frames = count("toy.patch_frames");
  c.patch_bins = count("toy.patch_bins");
  c.d_hidden = count("toy.d_hidden");
  c.t_max = count("toy.t_max");
  // Stored as f32; snap back to the double defaults when they round-trip.
  const std::vector<float> beta = idx.vector("toy.beta", 2);
  c.beta_start = beta[0] == static_cast<float>(kDefaultBetaStart) ? kDefaultBetaStart : beta[0];
  c.beta_end = beta[1] == static_cast<float>(kDefaultBetaEnd) ? kDefaultBetaEnd : beta[1];

  model.denoiser = DenoiserParams::init(c.patch_size(), c.d_hidden,
                                        model.pipeline.config.d_model, c.t_max, 0);
  std::vector<NamedTensor> tensors;
  append_tensors(tensors, "denoiser", model.denoiser);
  for (const NamedTensor& t : tensors) idx.read_into(t.name, *t.tensor);
  return model;
}

Matrix toy_target(const FeatureBundle& bundle, std::size_t frames, std::size_t bins) {
  double mean = 0.0;
  for (float v : bundle.caption_sem) mean += v;
  mean /= static_cast<double>(bundle.caption_sem.size());
  const double z = std::sqrt(static_cast<double>(bundle.caption_sem.size())) * mean;
  const double rate = 0.25 + 0.5 / (1.0 + std::exp(-z));
  Matrix x0(1, frames * bins);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t b = 0; b < bins; ++b) {
      const double level = std::exp(-rate * static_cast<double>(f)) *
                           (1.0 - 0.5 * static_cast<double>(b) / static_cast<double>(bins));
      x0(0, f * bins + b) = 2.0 * level - 1.0;
    }
  }
  return x0;
}

std::vector<ToySample> make_toy_dataset(std::uint64_t seed, std::size_t count, std::size_t m,
                                        std::size_t d, const ToyConfig& config) {
  require(count >= 1, ErrorCode::kInvalidArgument, "dataset must be non-empty");
  std::vector<ToySample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const FeatureBundle b = gen_synthetic_bundle(seed + i, m, d, Scenario::kPlanted);
    out.push_back({BundleTensors::from_bundle(b),
                   toy_target(b, config.patch_frames, config.patch_bins)});
  }
  return out;
}

namespace {

double mse(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

Matrix normals(Rng& rng, std::size_t n) {
  Matrix m(1, n);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

}  // namespace

double toy_loss(const ToyModel& model, const ToySample& sample, std::size_t t,
                const Matrix& noise, const DiffusionSchedule& schedule) {
  const PipelineState s =
      pipeline_forward(sample.features, model.pipeline, model.config.k, model.config.mode);
  const Matrix x_t = q_sample(sample.target, t, noise, schedule);
  return mse(denoiser_forward(x_t, t, s.h_v, model.denoiser), noise);
}

double toy_loss_and_grad(const ToyModel& model, const ToySample& sample, std::size_t t,
                         const Matrix& noise, const DiffusionSchedule& schedule, double weight,
                         ToyModel& grad) {
  const PipelineState s =
      pipeline_forward(sample.features, model.pipeline, model.config.k, model.config.mode);
  const Matrix x_t = q_sample(sample.target, t, noise, schedule);
  DenoiserCache cache;
  const Matrix eps = denoiser_forward(x_t, t, s.h_v, model.denoiser, &cache);
  Matrix d_eps = eps - noise;
  d_eps *= 2.0 * weight / static_cast<double>(eps.size());
  const Matrix d_hv = denoiser_backward(cache, model.denoiser, d_eps, grad.denoiser);
  pipeline_backward(sample.features, s, model.pipeline, d_hv, grad.pipeline);
  return mse(eps, noise);
}

TrainResult train_toy(const std::vector<ToySample>& dataset, ToyModel model,
                      const TrainOptions& opt) {
  require(!dataset.empty(), ErrorCode::kInvalidArgument, "dataset must be non-empty");
  require(opt.steps >= 1, ErrorCode::kInvalidArgument, "steps must be >= 1");
  require(std::isfinite(opt.learning_rate) && opt.learning_rate >= 0.0,
          ErrorCode::kInvalidArgument, "learning rate must be finite and non-negative");
  require(opt.eval_draws >= 1, ErrorCode::kInvalidArgument, "eval_draws must be >= 1");
  const DiffusionSchedule schedule = model.schedule();
  const std::size_t patch = model.config.patch_size();
  for (const ToySample& s : dataset) {
    require(s.target.rows() == 1 && s.target.cols() == patch, ErrorCode::kDimensionMismatch,
            "training target does not match the configured patch shape");
  }

  Rng rng(opt.seed);
  struct Draw {
    std::size_t sample;
    std::size_t t;
    Matrix noise;
  };
  std::vector<Draw> eval_set;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t r = 0; r < opt.eval_draws; ++r) {
      const std::size_t t = rng.below(schedule.t_max());
      eval_set.push_back({i, t, normals(rng, patch)});
    }
  }
  auto eval_loss = [&] {
    double total = 0.0;
    for (const Draw& d : eval_set) total += toy_loss(model, dataset[d.sample], d.t, d.noise, schedule);
    return total / static_cast<double>(eval_set.size());
  };

  TrainResult result;
  result.losses.reserve(opt.steps);
  const double weight = 1.0 / static_cast<double>(dataset.size());
  for (std::size_t step = 0; step < opt.steps; ++step) {
    const double loss = eval_loss();
    if (!std::isfinite(loss)) {
      fail(ErrorCode::kTrainingDiverged,
           "loss is not finite at step " + std::to_string(step));
    }
    result.losses.push_back(loss);

    ToyModel grad = zeros_like(model);
    for (const ToySample& sample : dataset) {
      const std::size_t t = rng.below(schedule.t_max());
      const Matrix noise = normals(rng, patch);
      toy_loss_and_grad(model, sample, t, noise, schedule, weight, grad);
    }

    std::vector<NamedTensor> params = named_tensors(model);
    std::vector<NamedTensor> grads = named_tensors(grad);
    double norm2 = 0.0;
    for (const NamedTensor& g : grads) {
      if (!g.tensor->all_finite()) {
        fail(ErrorCode::kTrainingDiverged, "non-finite gradient at step " +
                                               std::to_string(step) + " in " + g.name);
      }
      norm2 += squared_norm(*g.tensor);
    }
    const double norm = std::sqrt(norm2);
    const double scale = norm > opt.clip_norm ? opt.clip_norm / norm : 1.0;
    const double lr = opt.learning_rate * scale;
    if (lr == 0.0) continue;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i].tensor->values();
      auto g = grads[i].tensor->values();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
    }
  }
  result.model = std::move(model);
  return result;
}

Matrix sample_toy_conditioned(const ToyModel& model, const Matrix& h_v,
                              const DiffusionSchedule& schedule, std::uint64_t seed) {
  require(schedule.t_max() == model.denoiser.t_max(), ErrorCode::kDimensionMismatch,
          "schedule length differs from the denoiser time table");
  Rng rng(seed);
  const std::size_t patch = model.config.patch_size();
  Matrix x = normals(rng, patch);
  for (std::size_t t = schedule.t_max(); t-- > 0;) {
    const Matrix eps = denoiser_forward(x, t, h_v, model.denoiser);
    const double coef = schedule.beta[t] / std::sqrt(1.0 - schedule.alpha_bar[t]);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha[t]);
    for (std::size_t i = 0; i < patch; ++i) x(0, i) = inv_sqrt_alpha * (x(0, i) - coef * eps(0, i));
    if (t > 0) {
      const double sigma = std::sqrt(schedule.beta[t]);
      for (std::size_t i = 0; i < patch; ++i) x(0, i) += sigma * rng.normal();
    }
    if (!x.all_finite()) {
      fail(ErrorCode::kNonFinite, "sampler state became non-finite at step " + std::to_string(t));
    }
  }
  Matrix out(model.config.patch_frames, model.config.patch_bins);
  std::copy(x.values().begin(), x.values().end(), out.values().begin());
  return out;
}

Matrix sample_toy(const ToyModel& model, const FeatureBundle& bundle,
                  const DiffusionSchedule& schedule, std::uint64_t seed) {
  const BundleTensors x = BundleTensors::from_bundle(bundle);
  const PipelineState s = pipeline_forward(x, model.pipeline, model.config.k, model.config.mode);
  return sample_toy_conditioned(model, s.h_v, schedule, seed);
}

MelSpectrogram patch_to_mel(const Matrix& patch, std::size_t frame_repeat, const MelConfig& cfg) {
  require(frame_repeat >= 1, ErrorCode::kInvalidArgument, "frame_repeat must be >= 1");
  require(patch.rows() >= 1 && patch.cols() >= 1, ErrorCode::kInvalidArgument,
          "patch is empty");
  const std::size_t bins = patch.cols();
  MelSpectrogram mel{cfg, Matrix(patch.rows() * frame_repeat, cfg.n_mels)};
  for (std::size_t f = 0; f < patch.rows(); ++f) {
    for (std::size_t b = 0; b < cfg.n_mels; ++b) {
      const double pos = cfg.n_mels == 1 ? 0.0
                                         : static_cast<double>(b) * static_cast<double>(bins - 1) /
                                               static_cast<double>(cfg.n_mels - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, bins - 1);
      const double frac = pos - static_cast<double>(lo);
      const double v = std::clamp((1.0 - frac) * patch(f, lo) + frac * patch(f, hi), -1.0, 1.0);
      for (std::size_t r = 0; r < frame_repeat; ++r) mel.frames(f * frame_repeat + r, b) = -4.0 + 5.0 * v;
    }
  }
  return mel;
}

}  // namespace m2se
