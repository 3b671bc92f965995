/*
 * m2se: multi-modal, multi-scale spatial environment embeddings for
 * environment-aware speech synthesis, with acoustic evaluation metrics and a
 * small diffusion conditioning path.
 *
 * All functions return an m2se_status. On failure, m2se_last_error() returns a
 * human-readable message for the calling thread; it stays valid until the next
 * failing call on that thread. Handles are opaque, owned by the caller, and
 * released with the matching *_free function (which accepts NULL). Pointers
 * returned through accessors borrow from the handle and live as long as it.
 */
#ifndef M2SE_M2SE_H_
#define M2SE_M2SE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(M2SE_BUILDING_LIBRARY)
#define M2SE_API __attribute__((visibility("default")))
#else
#define M2SE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum m2se_status {
  M2SE_OK = 0,
  M2SE_ERR_INVALID_ARGUMENT = 1,
  M2SE_ERR_IO = 2,
  M2SE_ERR_BAD_MAGIC = 3,
  M2SE_ERR_VERSION = 4,
  M2SE_ERR_TRUNCATED = 5,
  M2SE_ERR_NON_FINITE = 6,
  M2SE_ERR_DIMENSION = 7,
  M2SE_ERR_ESTIMATION_FAILED = 8,
  M2SE_ERR_TRAINING_DIVERGED = 9,
  M2SE_ERR_INTERNAL = 10
} m2se_status;

M2SE_API const char* m2se_status_name(m2se_status status);
M2SE_API const char* m2se_last_error(void);
M2SE_API const char* m2se_version(void);

/* ---- feature bundles (.m2fb) ------------------------------------------ */

typedef struct m2se_bundle m2se_bundle;

typedef enum m2se_scenario {
  M2SE_SCENARIO_UNIFORM = 0,
  M2SE_SCENARIO_CLUSTERED = 1,
  M2SE_SCENARIO_PLANTED = 2
} m2se_scenario;

typedef struct m2se_bundle_info {
  uint32_t m;
  uint32_t d;
  const char* sample_id;
  const char* caption; /* NULL when the bundle carries no caption text */
} m2se_bundle_info;

M2SE_API m2se_status m2se_bundle_load(const char* path, m2se_bundle** out);
M2SE_API m2se_status m2se_bundle_save(const m2se_bundle* bundle, const char* path,
                                      uint64_t* bytes_written);
M2SE_API m2se_status m2se_bundle_generate(uint64_t seed, uint32_t m, uint32_t d,
                                          m2se_scenario scenario, m2se_bundle** out);
M2SE_API m2se_status m2se_bundle_set_sample_id(m2se_bundle* bundle, const char* sample_id);
M2SE_API m2se_status m2se_bundle_get_info(const m2se_bundle* bundle, m2se_bundle_info* info);
/* Row-major float views; which: 0 rgb_patch, 1 rgb_global, 2 depth_patch,
 * 3 depth_global, 4 caption_sem. */
M2SE_API m2se_status m2se_bundle_tensor(const m2se_bundle* bundle, int which,
                                        const float** data, size_t* count);
M2SE_API void m2se_bundle_free(m2se_bundle* bundle);

/* ---- pipeline parameters (M2CK checkpoints) --------------------------- */

typedef struct m2se_pipeline m2se_pipeline;

typedef struct m2se_pipeline_config {
  uint32_t d_in;
  uint32_t d_model;
  uint32_t heads_detector;
  uint32_t heads_other;
  double lambda1;
  double lambda2;
} m2se_pipeline_config;

typedef enum m2se_init {
  M2SE_INIT_XAVIER = 0,
  M2SE_INIT_IDENTITY = 1 /* requires d_in == d_model */
} m2se_init;

/* d_in 768, d_model 512, 2 detector heads, 4 other heads, lambdas 0.5. */
M2SE_API void m2se_pipeline_config_default(m2se_pipeline_config* config);
M2SE_API m2se_status m2se_pipeline_create(const m2se_pipeline_config* config, m2se_init init,
                                          uint64_t seed, m2se_pipeline** out);
M2SE_API m2se_status m2se_pipeline_load(const char* checkpoint_path, m2se_pipeline** out);
M2SE_API m2se_status m2se_pipeline_save(const m2se_pipeline* pipeline, const char* path);
M2SE_API m2se_status m2se_pipeline_get_config(const m2se_pipeline* pipeline,
                                              m2se_pipeline_config* config);
M2SE_API m2se_status m2se_pipeline_set_lambdas(m2se_pipeline* pipeline, double lambda1,
                                               double lambda2);
M2SE_API void m2se_pipeline_free(m2se_pipeline* pipeline);

/* ---- environment embedding -------------------------------------------- */

typedef enum m2se_mode { M2SE_MODE_SHARED = 0, M2SE_MODE_UNSHARED = 1 } m2se_mode;

typedef struct m2se_embedding m2se_embedding;

M2SE_API m2se_status m2se_embed(const m2se_pipeline* pipeline, const m2se_bundle* bundle,
                                uint32_t k, m2se_mode mode, m2se_embedding** out);
M2SE_API m2se_status m2se_embedding_hv(const m2se_embedding* e, const double** data,
                                       size_t* length);
/* stream: 0 = RGB selection, 1 = indices used for the depth gather. */
M2SE_API m2se_status m2se_embedding_indices(const m2se_embedding* e, int stream,
                                            const uint32_t** indices, size_t* k);
M2SE_API m2se_status m2se_embedding_selected_mass(const m2se_embedding* e, double* rgb,
                                                  double* depth);
M2SE_API m2se_status m2se_embedding_stage_count(const m2se_embedding* e, size_t* count);
M2SE_API m2se_status m2se_embedding_stage(const m2se_embedding* e, size_t index,
                                          const char** name, const double** weights,
                                          size_t* rows, size_t* cols);
M2SE_API void m2se_embedding_free(m2se_embedding* e);

/* ---- Top-k comparative sweep ------------------------------------------ */

typedef struct m2se_sweep_row {
  uint32_t k;
  m2se_mode mode;
  double mean_hv_distance;
  double mean_selected_mass;
  uint32_t bundles;
} m2se_sweep_row;

/* Produces 2 * (distinct ks) rows ordered by k, shared before unshared.
 * With rows == NULL only *rows_needed is set. A non-NULL rows whose capacity
 * is too small fails with M2SE_ERR_INVALID_ARGUMENT. */
M2SE_API m2se_status m2se_topk_sweep(const m2se_pipeline* pipeline,
                                     const m2se_bundle* const* bundles, size_t bundle_count,
                                     const uint32_t* ks, size_t k_count, m2se_sweep_row* rows,
                                     size_t capacity, size_t* rows_needed);

/* ---- audio and metrics ------------------------------------------------ */

typedef struct m2se_waveform m2se_waveform;
typedef struct m2se_mel m2se_mel;

typedef enum m2se_wav_format { M2SE_WAV_PCM16 = 0, M2SE_WAV_FLOAT32 = 1 } m2se_wav_format;

M2SE_API m2se_status m2se_wav_read(const char* path, m2se_waveform** out);
M2SE_API m2se_status m2se_wav_write(const m2se_waveform* w, const char* path,
                                    m2se_wav_format format);
M2SE_API m2se_status m2se_waveform_create(const float* samples, size_t count,
                                          uint32_t sample_rate, m2se_waveform** out);
M2SE_API m2se_status m2se_waveform_data(const m2se_waveform* w, const float** samples,
                                        size_t* count, uint32_t* sample_rate);
M2SE_API void m2se_waveform_free(m2se_waveform* w);

/* FFT 1024, hop 256, window 1024, 80 HTK mel bands, ln with floor 1e-5. */
M2SE_API m2se_status m2se_mel_compute(const m2se_waveform* w, m2se_mel** out);
M2SE_API m2se_status m2se_mel_save(const m2se_mel* mel, const char* path);
M2SE_API m2se_status m2se_mel_load(const char* path, uint32_t sample_rate, m2se_mel** out);
M2SE_API m2se_status m2se_mel_data(const m2se_mel* mel, const double** data, size_t* frames,
                                   size_t* n_mels);
M2SE_API void m2se_mel_free(m2se_mel* mel);

M2SE_API m2se_status m2se_mcd(const m2se_mel* reference, const m2se_mel* synthesized,
                              double* mcd_db);
M2SE_API m2se_status m2se_rt60(const m2se_waveform* w, double* seconds);
M2SE_API m2se_status m2se_rte(const m2se_waveform* reference, const m2se_waveform* synthesized,
                              double* seconds);
/* Per-pair report row. has_* flags mark which metrics were computed; when
 * RT60 estimation fails the pair still succeeds and note says why. */
typedef struct m2se_metric_row {
  int has_rt60_ref;
  int has_rt60_syn;
  int has_rte;
  int has_mcd;
  double rt60_ref;
  double rt60_syn;
  double rte;
  double mcd;
  char note[160];
} m2se_metric_row;

M2SE_API m2se_status m2se_evaluate_pair(const m2se_waveform* reference,
                                        const m2se_waveform* synthesized,
                                        m2se_metric_row* row);
M2SE_API m2se_status m2se_griffin_lim(const m2se_mel* mel, uint32_t iterations, uint64_t seed,
                                      m2se_waveform** out);

/* ---- toy diffusion ---------------------------------------------------- */

typedef struct m2se_toy_model m2se_toy_model;

typedef struct m2se_toy_config {
  uint32_t m;
  uint32_t d;
  uint32_t d_model;
  uint32_t heads_detector;
  uint32_t heads_other;
  uint32_t k;
  m2se_mode mode;
  uint32_t patch_frames;
  uint32_t patch_bins;
  uint32_t d_hidden;
  uint32_t t_max;
  double beta_start;
  double beta_end;
  uint32_t samples;
  uint32_t steps;
  double learning_rate;
  uint32_t eval_draws;
  uint64_t seed;
} m2se_toy_config;

/* m 8, d 6, d_model 4, heads 2/4, k 3, shared, patch 2x4, d_hidden 16,
 * T 100, beta 1e-4..0.06, 16 samples, 300 steps, lr 0.05, seed 0. */
M2SE_API void m2se_toy_config_default(m2se_toy_config* config);
M2SE_API m2se_status m2se_toy_train(const m2se_toy_config* config, m2se_toy_model** out);
M2SE_API m2se_status m2se_toy_losses(const m2se_toy_model* model, const double** losses,
                                     size_t* count);
M2SE_API m2se_status m2se_toy_save(const m2se_toy_model* model, const char* path);
M2SE_API m2se_status m2se_toy_load(const char* path, m2se_toy_model** out);
/* Writes patch_frames * patch_bins values (frame-major) into out. */
M2SE_API m2se_status m2se_toy_sample(const m2se_toy_model* model, const m2se_bundle* bundle,
                                     uint64_t seed, double* out, size_t capacity,
                                     uint32_t* frames, uint32_t* bins);
M2SE_API m2se_status m2se_toy_patch_to_mel(const double* patch, uint32_t frames, uint32_t bins,
                                           uint32_t frame_repeat, uint32_t sample_rate,
                                           m2se_mel** out);
M2SE_API void m2se_toy_free(m2se_toy_model* model);

/* ---- checkpoint inspection -------------------------------------------- */

typedef struct m2se_checkpoint m2se_checkpoint;

M2SE_API m2se_status m2se_checkpoint_open(const char* path, m2se_checkpoint** out);
M2SE_API m2se_status m2se_checkpoint_count(const m2se_checkpoint* ck, size_t* count);
M2SE_API m2se_status m2se_checkpoint_entry(const m2se_checkpoint* ck, size_t index,
                                           const char** name, const uint32_t** dims,
                                           size_t* rank, size_t* elements);
M2SE_API void m2se_checkpoint_free(m2se_checkpoint* ck);

#ifdef __cplusplus
}
#endif

#endif /* M2SE_M2SE_H_ */
