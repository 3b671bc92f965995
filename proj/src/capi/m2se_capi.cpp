#include "m2se/m2se.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "m2se/audio.hpp"
#include "m2se/checkpoint.hpp"
#include "m2se/diffusion.hpp"
#include "m2se/error.hpp"
#include "m2se/feature_io.hpp"
#include "m2se/global_fusion.hpp"
#include "m2se/metrics.hpp"
#include "m2se/spectral.hpp"
#include "m2se/study.hpp"

struct m2se_bundle {
  m2se::FeatureBundle value;
};

struct m2se_pipeline {
  m2se::PipelineParams value;
};

struct m2se_embedding {
  m2se::EnvironmentEmbedding embedding;
  m2se::PipelineTrace trace;
  std::vector<std::uint32_t> omega;
  std::vector<std::uint32_t> omega_depth;
};

struct m2se_waveform {
  m2se::Waveform value;
};

struct m2se_mel {
  m2se::MelSpectrogram value;
};

struct m2se_toy_model {
  m2se::ToyModel value;
  std::vector<double> losses;
};

struct m2se_checkpoint {
  m2se::Checkpoint value;
};

namespace {

thread_local std::string g_last_error;

m2se_status set_error(m2se_status status, const char* what) {
  g_last_error = what;
  return status;
}

template <class F>
m2se_status guarded(F&& body) {
  try {
    body();
    return M2SE_OK;
  } catch (const m2se::Error& e) {
    return set_error(static_cast<m2se_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(M2SE_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(M2SE_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(M2SE_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* name) {
  if (!p) m2se::fail(m2se::ErrorCode::kInvalidArgument, std::string(name) + " is NULL");
}

m2se::TopkMode to_mode(m2se_mode mode) {
  switch (mode) {
    case M2SE_MODE_SHARED: return m2se::TopkMode::kShared;
    case M2SE_MODE_UNSHARED: return m2se::TopkMode::kUnshared;
  }
  m2se::fail(m2se::ErrorCode::kInvalidArgument, "unknown Top-k mode");
}

m2se_mode from_mode(m2se::TopkMode mode) {
  return mode == m2se::TopkMode::kShared ? M2SE_MODE_SHARED : M2SE_MODE_UNSHARED;
}

m2se::PipelineConfig to_pipeline_config(const m2se_pipeline_config& c) {
  return {c.d_in, c.d_model, c.heads_detector, c.heads_other};
}

m2se::MelConfig mel_config(std::uint32_t sample_rate) {
  m2se::MelConfig cfg;
  cfg.sample_rate = sample_rate;
  return cfg;
}

}  // namespace

extern "C" {

const char* m2se_status_name(m2se_status status) {
  switch (status) {
    case M2SE_OK: return "ok";
    case M2SE_ERR_INVALID_ARGUMENT: return "invalid argument";
    case M2SE_ERR_IO: return "i/o error";
    case M2SE_ERR_BAD_MAGIC: return "bad magic";
    case M2SE_ERR_VERSION: return "version mismatch";
    case M2SE_ERR_TRUNCATED: return "truncated";
    case M2SE_ERR_NON_FINITE: return "non-finite value";
    case M2SE_ERR_DIMENSION: return "dimension mismatch";
    case M2SE_ERR_ESTIMATION_FAILED: return "estimation failed";
    case M2SE_ERR_TRAINING_DIVERGED: return "training diverged";
    case M2SE_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* m2se_last_error(void) { return g_last_error.c_str(); }

const char* m2se_version(void) { return "1.0.0"; }

/* bundles */

m2se_status m2se_bundle_load(const char* path, m2se_bundle** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new m2se_bundle{m2se::load_bundle_file(path)};
  });
}

m2se_status m2se_bundle_save(const m2se_bundle* bundle, const char* path,
                             uint64_t* bytes_written) {
  return guarded([&] {
    need(bundle, "bundle");
    need(path, "path");
    const std::uint64_t n = m2se::save_bundle_file(bundle->value, path);
    if (bytes_written) *bytes_written = n;
  });
}

m2se_status m2se_bundle_generate(uint64_t seed, uint32_t m, uint32_t d, m2se_scenario scenario,
                                 m2se_bundle** out) {
  return guarded([&] {
    need(out, "out");
    m2se::Scenario s;
    switch (scenario) {
      case M2SE_SCENARIO_UNIFORM: s = m2se::Scenario::kUniform; break;
      case M2SE_SCENARIO_CLUSTERED: s = m2se::Scenario::kClustered; break;
      case M2SE_SCENARIO_PLANTED: s = m2se::Scenario::kPlanted; break;
      default: m2se::fail(m2se::ErrorCode::kInvalidArgument, "unknown scenario");
    }
    *out = new m2se_bundle{m2se::gen_synthetic_bundle(seed, m, d, s)};
  });
}

m2se_status m2se_bundle_set_sample_id(m2se_bundle* bundle, const char* sample_id) {
  return guarded([&] {
    need(bundle, "bundle");
    need(sample_id, "sample_id");
    bundle->value.sample_id = sample_id;
  });
}

m2se_status m2se_bundle_get_info(const m2se_bundle* bundle, m2se_bundle_info* info) {
  return guarded([&] {
    need(bundle, "bundle");
    need(info, "info");
    const m2se::FeatureBundle& b = bundle->value;
    info->m = static_cast<uint32_t>(b.m);
    info->d = static_cast<uint32_t>(b.d);
    info->sample_id = b.sample_id.c_str();
    info->caption = b.caption_text ? b.caption_text->c_str() : nullptr;
  });
}

m2se_status m2se_bundle_tensor(const m2se_bundle* bundle, int which, const float** data,
                               size_t* count) {
  return guarded([&] {
    need(bundle, "bundle");
    need(data, "data");
    need(count, "count");
    const m2se::FeatureBundle& b = bundle->value;
    const std::vector<float>* v = nullptr;
    switch (which) {
      case 0: v = &b.rgb_patch; break;
      case 1: v = &b.rgb_global; break;
      case 2: v = &b.depth_patch; break;
      case 3: v = &b.depth_global; break;
      case 4: v = &b.caption_sem; break;
      default: m2se::fail(m2se::ErrorCode::kInvalidArgument, "unknown tensor selector");
    }
    *data = v->data();
    *count = v->size();
  });
}

void m2se_bundle_free(m2se_bundle* bundle) { delete bundle; }

/* pipeline */

void m2se_pipeline_config_default(m2se_pipeline_config* config) {
  if (!config) return;
  config->d_in = static_cast<uint32_t>(m2se::kDefaultFeatureDim);
  config->d_model = static_cast<uint32_t>(m2se::kDefaultModelDim);
  config->heads_detector = static_cast<uint32_t>(m2se::kDefaultDetectorHeads);
  config->heads_other = static_cast<uint32_t>(m2se::kDefaultOtherHeads);
  config->lambda1 = m2se::kDefaultLambda;
  config->lambda2 = m2se::kDefaultLambda;
}

m2se_status m2se_pipeline_create(const m2se_pipeline_config* config, m2se_init init,
                                 uint64_t seed, m2se_pipeline** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    const m2se::PipelineConfig pc = to_pipeline_config(*config);
    m2se::PipelineParams p;
    switch (init) {
      case M2SE_INIT_XAVIER: p = m2se::PipelineParams::xavier(pc, seed); break;
      case M2SE_INIT_IDENTITY: p = m2se::PipelineParams::identity(pc); break;
      default: m2se::fail(m2se::ErrorCode::kInvalidArgument, "unknown initialisation");
    }
    p.lambda1 = config->lambda1;
    p.lambda2 = config->lambda2;
    m2se::validate(p);
    *out = new m2se_pipeline{std::move(p)};
  });
}

m2se_status m2se_pipeline_load(const char* checkpoint_path, m2se_pipeline** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint_path");
    need(out, "out");
    *out = new m2se_pipeline{
        m2se::pipeline_from_checkpoint(m2se::load_checkpoint_file(checkpoint_path))};
  });
}

m2se_status m2se_pipeline_save(const m2se_pipeline* pipeline, const char* path) {
  return guarded([&] {
    need(pipeline, "pipeline");
    need(path, "path");
    m2se::Checkpoint ck;
    m2se::append_pipeline(ck, pipeline->value);
    m2se::save_checkpoint_file(ck, path);
  });
}

m2se_status m2se_pipeline_get_config(const m2se_pipeline* pipeline,
                                     m2se_pipeline_config* config) {
  return guarded([&] {
    need(pipeline, "pipeline");
    need(config, "config");
    const m2se::PipelineParams& p = pipeline->value;
    config->d_in = static_cast<uint32_t>(p.config.d_in);
    config->d_model = static_cast<uint32_t>(p.config.d_model);
    config->heads_detector = static_cast<uint32_t>(p.config.heads_detector);
    config->heads_other = static_cast<uint32_t>(p.config.heads_other);
    config->lambda1 = p.lambda1;
    config->lambda2 = p.lambda2;
  });
}

m2se_status m2se_pipeline_set_lambdas(m2se_pipeline* pipeline, double lambda1, double lambda2) {
  return guarded([&] {
    need(pipeline, "pipeline");
    m2se::require(std::isfinite(lambda1) && std::isfinite(lambda2),
                  m2se::ErrorCode::kNonFinite, "fusion weights must be finite");
    pipeline->value.lambda1 = lambda1;
    pipeline->value.lambda2 = lambda2;
  });
}

void m2se_pipeline_free(m2se_pipeline* pipeline) { delete pipeline; }

/* embedding */

m2se_status m2se_embed(const m2se_pipeline* pipeline, const m2se_bundle* bundle, uint32_t k,
                       m2se_mode mode, m2se_embedding** out) {
  return guarded([&] {
    need(pipeline, "pipeline");
    need(bundle, "bundle");
    need(out, "out");
    auto [embedding, trace] =
        m2se::compute_environment_embedding(bundle->value, pipeline->value, k, to_mode(mode));
    auto* e = new m2se_embedding{std::move(embedding), std::move(trace), {}, {}};
    e->omega.assign(e->trace.omega.begin(), e->trace.omega.end());
    e->omega_depth.assign(e->trace.omega_depth.begin(), e->trace.omega_depth.end());
    *out = e;
  });
}

m2se_status m2se_embedding_hv(const m2se_embedding* e, const double** data, size_t* length) {
  return guarded([&] {
    need(e, "embedding");
    need(data, "data");
    need(length, "length");
    *data = e->embedding.h_v.data();
    *length = e->embedding.h_v.size();
  });
}

m2se_status m2se_embedding_indices(const m2se_embedding* e, int stream,
                                   const uint32_t** indices, size_t* k) {
  return guarded([&] {
    need(e, "embedding");
    need(indices, "indices");
    need(k, "k");
    m2se::require(stream == 0 || stream == 1, m2se::ErrorCode::kInvalidArgument,
                  "stream must be 0 (rgb) or 1 (depth)");
    const std::vector<std::uint32_t>& v = stream == 0 ? e->omega : e->omega_depth;
    *indices = v.data();
    *k = v.size();
  });
}

m2se_status m2se_embedding_selected_mass(const m2se_embedding* e, double* rgb, double* depth) {
  return guarded([&] {
    need(e, "embedding");
    double r = 0.0, d = 0.0;
    for (double w : e->trace.rgb_selected_weights) r += w;
    for (double w : e->trace.depth_selected_weights) d += w;
    if (rgb) *rgb = r;
    if (depth) *depth = d;
  });
}

m2se_status m2se_embedding_stage_count(const m2se_embedding* e, size_t* count) {
  return guarded([&] {
    need(e, "embedding");
    need(count, "count");
    *count = e->trace.stage_weights.size();
  });
}

m2se_status m2se_embedding_stage(const m2se_embedding* e, size_t index, const char** name,
                                 const double** weights, size_t* rows, size_t* cols) {
  return guarded([&] {
    need(e, "embedding");
    m2se::require(index < e->trace.stage_weights.size(), m2se::ErrorCode::kInvalidArgument,
                  "stage index out of range");
    const auto& [stage, w] = e->trace.stage_weights[index];
    if (name) *name = stage.c_str();
    if (weights) *weights = w.values().data();
    if (rows) *rows = w.rows();
    if (cols) *cols = w.cols();
  });
}

void m2se_embedding_free(m2se_embedding* e) { delete e; }

/* sweep */

m2se_status m2se_topk_sweep(const m2se_pipeline* pipeline, const m2se_bundle* const* bundles,
                            size_t bundle_count, const uint32_t* ks, size_t k_count,
                            m2se_sweep_row* rows, size_t capacity, size_t* rows_needed) {
  return guarded([&] {
    need(pipeline, "pipeline");
    need(bundles, "bundles");
    need(ks, "ks");
    need(rows_needed, "rows_needed");
    std::vector<m2se::FeatureBundle> inputs;
    inputs.reserve(bundle_count);
    for (size_t i = 0; i < bundle_count; ++i) {
      need(bundles[i], "bundle");
      inputs.push_back(bundles[i]->value);
    }
    std::vector<std::size_t> grid(ks, ks + k_count);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    *rows_needed = 2 * grid.size();
    if (!rows) return;
    m2se::require(capacity >= *rows_needed, m2se::ErrorCode::kInvalidArgument,
                  "row buffer too small");
    const std::vector<m2se::SweepRow> out = m2se::topk_sweep(inputs, pipeline->value, grid);
    for (size_t i = 0; i < out.size(); ++i) {
      rows[i] = {static_cast<uint32_t>(out[i].k), from_mode(out[i].mode),
                 out[i].mean_hv_distance, out[i].mean_selected_mass,
                 static_cast<uint32_t>(out[i].bundles)};
    }
  });
}

/* audio */

m2se_status m2se_wav_read(const char* path, m2se_waveform** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new m2se_waveform{m2se::read_wav(path)};
  });
}

m2se_status m2se_wav_write(const m2se_waveform* w, const char* path, m2se_wav_format format) {
  return guarded([&] {
    need(w, "waveform");
    need(path, "path");
    m2se::write_wav(w->value, path,
                    format == M2SE_WAV_FLOAT32 ? m2se::WavFormat::kFloat32 : m2se::WavFormat::kPcm16);
  });
}

m2se_status m2se_waveform_create(const float* samples, size_t count, uint32_t sample_rate,
                                 m2se_waveform** out) {
  return guarded([&] {
    if (count) need(samples, "samples");
    need(out, "out");
    m2se::Waveform w;
    w.samples.assign(samples, samples + count);
    w.sample_rate = sample_rate;
    m2se::validate(w);
    *out = new m2se_waveform{std::move(w)};
  });
}

m2se_status m2se_waveform_data(const m2se_waveform* w, const float** samples, size_t* count,
                               uint32_t* sample_rate) {
  return guarded([&] {
    need(w, "waveform");
    if (samples) *samples = w->value.samples.data();
    if (count) *count = w->value.samples.size();
    if (sample_rate) *sample_rate = w->value.sample_rate;
  });
}

void m2se_waveform_free(m2se_waveform* w) { delete w; }

m2se_status m2se_mel_compute(const m2se_waveform* w, m2se_mel** out) {
  return guarded([&] {
    need(w, "waveform");
    need(out, "out");
    *out = new m2se_mel{m2se::mel_spectrogram(w->value)};
  });
}

m2se_status m2se_mel_save(const m2se_mel* mel, const char* path) {
  return guarded([&] {
    need(mel, "mel");
    need(path, "path");
    m2se::save_mel_file(mel->value, path);
  });
}

m2se_status m2se_mel_load(const char* path, uint32_t sample_rate, m2se_mel** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new m2se_mel{m2se::load_mel_file(path, mel_config(sample_rate))};
  });
}

m2se_status m2se_mel_data(const m2se_mel* mel, const double** data, size_t* frames,
                          size_t* n_mels) {
  return guarded([&] {
    need(mel, "mel");
    if (data) *data = mel->value.frames.values().data();
    if (frames) *frames = mel->value.frames.rows();
    if (n_mels) *n_mels = mel->value.frames.cols();
  });
}

void m2se_mel_free(m2se_mel* mel) { delete mel; }

m2se_status m2se_mcd(const m2se_mel* reference, const m2se_mel* synthesized, double* mcd_db) {
  return guarded([&] {
    need(reference, "reference");
    need(synthesized, "synthesized");
    need(mcd_db, "mcd_db");
    *mcd_db = m2se::mcd(reference->value, synthesized->value);
  });
}

m2se_status m2se_rt60(const m2se_waveform* w, double* seconds) {
  return guarded([&] {
    need(w, "waveform");
    need(seconds, "seconds");
    *seconds = m2se::schroeder_rt60(w->value);
  });
}

m2se_status m2se_rte(const m2se_waveform* reference, const m2se_waveform* synthesized,
                     double* seconds) {
  return guarded([&] {
    need(reference, "reference");
    need(synthesized, "synthesized");
    need(seconds, "seconds");
    *seconds = m2se::rte(reference->value, synthesized->value);
  });
}

m2se_status m2se_evaluate_pair(const m2se_waveform* reference, const m2se_waveform* synthesized,
                               m2se_metric_row* row) {
  return guarded([&] {
    need(reference, "reference");
    need(synthesized, "synthesized");
    need(row, "row");
    const m2se::MetricRow r = m2se::evaluate_pair(
        "", reference->value, synthesized->value, mel_config(reference->value.sample_rate));
    *row = {};
    row->has_rt60_ref = r.rt60_ref.has_value();
    row->has_rt60_syn = r.rt60_syn.has_value();
    row->has_rte = r.rte.has_value();
    row->has_mcd = r.mcd.has_value();
    row->rt60_ref = r.rt60_ref.value_or(0.0);
    row->rt60_syn = r.rt60_syn.value_or(0.0);
    row->rte = r.rte.value_or(0.0);
    row->mcd = r.mcd.value_or(0.0);
    std::snprintf(row->note, sizeof row->note, "%s", r.note.c_str());
  });
}

m2se_status m2se_griffin_lim(const m2se_mel* mel, uint32_t iterations, uint64_t seed,
                             m2se_waveform** out) {
  return guarded([&] {
    need(mel, "mel");
    need(out, "out");
    *out = new m2se_waveform{m2se::griffin_lim(mel->value, iterations, seed)};
  });
}

/* toy diffusion */

void m2se_toy_config_default(m2se_toy_config* c) {
  if (!c) return;
  const m2se::ToyConfig toy;
  const m2se::TrainOptions train;
  c->m = 8;
  c->d = 6;
  c->d_model = 4;
  c->heads_detector = static_cast<uint32_t>(m2se::kDefaultDetectorHeads);
  c->heads_other = static_cast<uint32_t>(m2se::kDefaultOtherHeads);
  c->k = static_cast<uint32_t>(toy.k);
  c->mode = M2SE_MODE_SHARED;
  c->patch_frames = static_cast<uint32_t>(toy.patch_frames);
  c->patch_bins = static_cast<uint32_t>(toy.patch_bins);
  c->d_hidden = static_cast<uint32_t>(toy.d_hidden);
  c->t_max = static_cast<uint32_t>(toy.t_max);
  c->beta_start = toy.beta_start;
  c->beta_end = toy.beta_end;
  c->samples = 16;
  c->steps = static_cast<uint32_t>(train.steps);
  c->learning_rate = train.learning_rate;
  c->eval_draws = static_cast<uint32_t>(train.eval_draws);
  c->seed = 0;
}

m2se_status m2se_toy_train(const m2se_toy_config* c, m2se_toy_model** out) {
  return guarded([&] {
    need(c, "config");
    need(out, "out");
    m2se::ToyConfig toy;
    toy.k = c->k;
    toy.mode = to_mode(c->mode);
    toy.patch_frames = c->patch_frames;
    toy.patch_bins = c->patch_bins;
    toy.d_hidden = c->d_hidden;
    toy.t_max = c->t_max;
    toy.beta_start = c->beta_start;
    toy.beta_end = c->beta_end;
    const m2se::PipelineConfig pc{c->d, c->d_model, c->heads_detector, c->heads_other};
    m2se::require(c->k >= 1 && c->k <= c->m, m2se::ErrorCode::kInvalidArgument,
                  "k must lie in [1, m]");
    const std::vector<m2se::ToySample> data =
        m2se::make_toy_dataset(c->seed, c->samples, c->m, c->d, toy);
    m2se::TrainOptions opt;
    opt.steps = c->steps;
    opt.learning_rate = c->learning_rate;
    opt.seed = c->seed;
    opt.eval_draws = c->eval_draws;
    m2se::TrainResult r = m2se::train_toy(data, m2se::ToyModel::init(toy, pc, c->seed), opt);
    *out = new m2se_toy_model{std::move(r.model), std::move(r.losses)};
  });
}

m2se_status m2se_toy_losses(const m2se_toy_model* model, const double** losses, size_t* count) {
  return guarded([&] {
    need(model, "model");
    need(losses, "losses");
    need(count, "count");
    *losses = model->losses.data();
    *count = model->losses.size();
  });
}

m2se_status m2se_toy_save(const m2se_toy_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    m2se::save_checkpoint_file(m2se::to_checkpoint(model->value), path);
  });
}

m2se_status m2se_toy_load(const char* path, m2se_toy_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new m2se_toy_model{m2se::toy_model_from_checkpoint(m2se::load_checkpoint_file(path)),
                              {}};
  });
}

m2se_status m2se_toy_sample(const m2se_toy_model* model, const m2se_bundle* bundle,
                            uint64_t seed, double* out, size_t capacity, uint32_t* frames,
                            uint32_t* bins) {
  return guarded([&] {
    need(model, "model");
    need(bundle, "bundle");
    need(out, "out");
    const m2se::ToyConfig& c = model->value.config;
    m2se::require(capacity >= c.patch_size(), m2se::ErrorCode::kInvalidArgument,
                  "output buffer too small for the patch");
    const m2se::Matrix patch =
        m2se::sample_toy(model->value, bundle->value, model->value.schedule(), seed);
    std::copy(patch.values().begin(), patch.values().end(), out);
    if (frames) *frames = static_cast<uint32_t>(patch.rows());
    if (bins) *bins = static_cast<uint32_t>(patch.cols());
  });
}

m2se_status m2se_toy_patch_to_mel(const double* patch, uint32_t frames, uint32_t bins,
                                  uint32_t frame_repeat, uint32_t sample_rate, m2se_mel** out) {
  return guarded([&] {
    need(patch, "patch");
    need(out, "out");
    const std::size_t n = static_cast<std::size_t>(frames) * bins;
    const m2se::Matrix p(frames, bins, std::vector<double>(patch, patch + n));
    *out = new m2se_mel{m2se::patch_to_mel(p, frame_repeat, mel_config(sample_rate))};
  });
}

void m2se_toy_free(m2se_toy_model* model) { delete model; }

/* checkpoints */

m2se_status m2se_checkpoint_open(const char* path, m2se_checkpoint** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new m2se_checkpoint{m2se::load_checkpoint_file(path)};
  });
}

m2se_status m2se_checkpoint_count(const m2se_checkpoint* ck, size_t* count) {
  return guarded([&] {
    need(ck, "checkpoint");
    need(count, "count");
    *count = ck->value.size();
  });
}

m2se_status m2se_checkpoint_entry(const m2se_checkpoint* ck, size_t index, const char** name,
                                  const uint32_t** dims, size_t* rank, size_t* elements) {
  return guarded([&] {
    need(ck, "checkpoint");
    m2se::require(index < ck->value.size(), m2se::ErrorCode::kInvalidArgument,
                  "entry index out of range");
    const m2se::CheckpointTensor& t = ck->value[index];
    if (name) *name = t.name.c_str();
    if (dims) *dims = t.dims.data();
    if (rank) *rank = t.dims.size();
    if (elements) *elements = t.data.size();
  });
}

void m2se_checkpoint_free(m2se_checkpoint* ck) { delete ck; }

}  // extern "C"
