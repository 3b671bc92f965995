#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "m2se/m2se.h"
#include "oracles.hpp"

namespace {

struct BundleDeleter {
  void operator()(m2se_bundle* b) const { m2se_bundle_free(b); }
};
using Bundle = std::unique_ptr<m2se_bundle, BundleDeleter>;

Bundle generate(std::uint64_t seed, std::uint32_t m, std::uint32_t d,
                m2se_scenario s = M2SE_SCENARIO_PLANTED) {
  m2se_bundle* b = nullptr;
  EXPECT_EQ(m2se_bundle_generate(seed, m, d, s, &b), M2SE_OK);
  return Bundle(b);
}

m2se_pipeline* small_pipeline(std::uint64_t seed) {
  m2se_pipeline_config cfg;
  m2se_pipeline_config_default(&cfg);
  cfg.d_in = 6;
  cfg.d_model = 4;
  m2se_pipeline* p = nullptr;
  EXPECT_EQ(m2se_pipeline_create(&cfg, M2SE_INIT_XAVIER, seed, &p), M2SE_OK);
  return p;
}

}  // namespace

TEST(CApi, StatusNamesAndVersion) {
  EXPECT_STREQ(m2se_status_name(M2SE_OK), "ok");
  for (int s = 0; s <= 10; ++s) EXPECT_NE(m2se_status_name(static_cast<m2se_status>(s)), nullptr);
  EXPECT_NE(std::string(m2se_version()), "");
}

TEST(CApi, NullArgumentsAreInvalid) {
  m2se_bundle* b = nullptr;
  EXPECT_EQ(m2se_bundle_load(nullptr, &b), M2SE_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(m2se_bundle_load("x", nullptr), M2SE_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(m2se_last_error()), "");
  EXPECT_EQ(m2se_pipeline_create(nullptr, M2SE_INIT_XAVIER, 0, nullptr), M2SE_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(m2se_embed(nullptr, nullptr, 1, M2SE_MODE_SHARED, nullptr), M2SE_ERR_INVALID_ARGUMENT);
  double v = 0.0;
  EXPECT_EQ(m2se_rt60(nullptr, &v), M2SE_ERR_INVALID_ARGUMENT);
  // Free functions accept NULL.
  m2se_bundle_free(nullptr);
  m2se_pipeline_free(nullptr);
  m2se_embedding_free(nullptr);
  m2se_waveform_free(nullptr);
  m2se_mel_free(nullptr);
  m2se_toy_free(nullptr);
  m2se_checkpoint_free(nullptr);
}

TEST(CApi, ErrorCodesCrossTheBoundary) {
  const auto dir = oracle::scratch_dir("capi-err");
  m2se_bundle* b = nullptr;
  EXPECT_EQ(m2se_bundle_load((dir / "missing.m2fb").c_str(), &b), M2SE_ERR_IO);
  EXPECT_EQ(b, nullptr);
  std::ofstream(dir / "junk.m2fb", std::ios::binary) << "JUNKJUNKJUNKJUNK";
  EXPECT_EQ(m2se_bundle_load((dir / "junk.m2fb").c_str(), &b), M2SE_ERR_BAD_MAGIC);
  EXPECT_NE(std::string(m2se_last_error()).find("M2FB"), std::string::npos) << m2se_last_error();
  std::filesystem::remove_all(dir);
}

TEST(CApi, BundleRoundTripThroughFile) {
  const auto dir = oracle::scratch_dir("capi-b");
  Bundle b = generate(3, 16, 8);
  ASSERT_EQ(m2se_bundle_set_sample_id(b.get(), "room-7"), M2SE_OK);
  const std::string path = (dir / "b.m2fb").string();
  std::uint64_t bytes = 0;
  ASSERT_EQ(m2se_bundle_save(b.get(), path.c_str(), &bytes), M2SE_OK);
  EXPECT_EQ(bytes, std::filesystem::file_size(path));

  m2se_bundle* raw = nullptr;
  ASSERT_EQ(m2se_bundle_load(path.c_str(), &raw), M2SE_OK);
  Bundle back(raw);
  m2se_bundle_info info;
  ASSERT_EQ(m2se_bundle_get_info(back.get(), &info), M2SE_OK);
  EXPECT_EQ(info.m, 16u);
  EXPECT_EQ(info.d, 8u);
  EXPECT_STREQ(info.sample_id, "room-7");
  for (int which = 0; which < 5; ++which) {
    const float *x = nullptr, *y = nullptr;
    std::size_t nx = 0, ny = 0;
    ASSERT_EQ(m2se_bundle_tensor(b.get(), which, &x, &nx), M2SE_OK);
    ASSERT_EQ(m2se_bundle_tensor(back.get(), which, &y, &ny), M2SE_OK);
    ASSERT_EQ(nx, ny);
    EXPECT_EQ(nx, which % 2 == 0 && which < 4 ? 16u * 8u : 8u);
    EXPECT_EQ(std::memcmp(x, y, nx * sizeof(float)), 0);
  }
  const float* x = nullptr;
  std::size_t n = 0;
  EXPECT_EQ(m2se_bundle_tensor(b.get(), 5, &x, &n), M2SE_ERR_INVALID_ARGUMENT);
  std::filesystem::remove_all(dir);
}

TEST(CApi, EmbeddingAccessors) {
  Bundle b = generate(4, 8, 6);
  m2se_pipeline* p = small_pipeline(1);
  m2se_embedding* e = nullptr;
  ASSERT_EQ(m2se_embed(p, b.get(), 3, M2SE_MODE_SHARED, &e), M2SE_OK);
  const double* hv = nullptr;
  std::size_t len = 0;
  ASSERT_EQ(m2se_embedding_hv(e, &hv, &len), M2SE_OK);
  EXPECT_EQ(len, 4u);
  for (std::size_t i = 0; i < len; ++i) EXPECT_TRUE(std::isfinite(hv[i]));
  const std::uint32_t *rgb = nullptr, *depth = nullptr;
  std::size_t kr = 0, kd = 0;
  ASSERT_EQ(m2se_embedding_indices(e, 0, &rgb, &kr), M2SE_OK);
  ASSERT_EQ(m2se_embedding_indices(e, 1, &depth, &kd), M2SE_OK);
  ASSERT_EQ(kr, 3u);
  EXPECT_EQ(std::vector<std::uint32_t>(rgb, rgb + kr), std::vector<std::uint32_t>(depth, depth + kd));
  double mr = 0.0, md = 0.0;
  ASSERT_EQ(m2se_embedding_selected_mass(e, &mr, &md), M2SE_OK);
  EXPECT_GT(mr, 0.0);
  EXPECT_LE(mr, 1.0 + 1e-12);
  std::size_t stages = 0;
  ASSERT_EQ(m2se_embedding_stage_count(e, &stages), M2SE_OK);
  EXPECT_GE(stages, 5u);
  const char* name = nullptr;
  const double* w = nullptr;
  std::size_t rows = 0, cols = 0;
  ASSERT_EQ(m2se_embedding_stage(e, 0, &name, &w, &rows, &cols), M2SE_OK);
  EXPECT_EQ(cols, 8u);
  EXPECT_EQ(m2se_embedding_stage(e, stages, &name, &w, &rows, &cols), M2SE_ERR_INVALID_ARGUMENT);
  m2se_embedding_free(e);

  e = nullptr;
  EXPECT_EQ(m2se_embed(p, b.get(), 9, M2SE_MODE_SHARED, &e), M2SE_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(e, nullptr);
  m2se_pipeline_free(p);
}

TEST(CApi, PipelineCheckpointRoundTrip) {
  const auto dir = oracle::scratch_dir("capi-p");
  Bundle b = generate(5, 8, 6);
  m2se_pipeline* p = small_pipeline(2);
  ASSERT_EQ(m2se_pipeline_set_lambdas(p, 0.3, 0.9), M2SE_OK);
  const std::string path = (dir / "p.m2ck").string();
  ASSERT_EQ(m2se_pipeline_save(p, path.c_str()), M2SE_OK);
  m2se_pipeline* q = nullptr;
  ASSERT_EQ(m2se_pipeline_load(path.c_str(), &q), M2SE_OK);
  m2se_pipeline_config cfg;
  ASSERT_EQ(m2se_pipeline_get_config(q, &cfg), M2SE_OK);
  EXPECT_EQ(cfg.d_in, 6u);
  EXPECT_EQ(cfg.d_model, 4u);
  EXPECT_EQ(cfg.lambda1, static_cast<double>(0.3f));
  EXPECT_EQ(cfg.lambda2, static_cast<double>(0.9f));

  // Weights are stored as f32, so embeddings agree to single precision.
  m2se_embedding *ea = nullptr, *eb = nullptr;
  ASSERT_EQ(m2se_embed(p, b.get(), 3, M2SE_MODE_UNSHARED, &ea), M2SE_OK);
  ASSERT_EQ(m2se_embed(q, b.get(), 3, M2SE_MODE_UNSHARED, &eb), M2SE_OK);
  const double *ha = nullptr, *hb = nullptr;
  std::size_t n = 0;
  m2se_embedding_hv(ea, &ha, &n);
  m2se_embedding_hv(eb, &hb, &n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(ha[i], hb[i], 1e-5);

  m2se_checkpoint* ck = nullptr;
  ASSERT_EQ(m2se_checkpoint_open(path.c_str(), &ck), M2SE_OK);
  std::size_t count = 0;
  ASSERT_EQ(m2se_checkpoint_count(ck, &count), M2SE_OK);
  EXPECT_GT(count, 10u);
  const char* name = nullptr;
  const std::uint32_t* dims = nullptr;
  std::size_t rank = 0, elements = 0;
  ASSERT_EQ(m2se_checkpoint_entry(ck, 0, &name, &dims, &rank, &elements), M2SE_OK);
  EXPECT_NE(std::string(name).find("pipeline."), std::string::npos);
  EXPECT_EQ(m2se_checkpoint_entry(ck, count, &name, &dims, &rank, &elements), M2SE_ERR_INVALID_ARGUMENT);

  m2se_checkpoint_free(ck);
  m2se_embedding_free(ea);
  m2se_embedding_free(eb);
  m2se_pipeline_free(p);
  m2se_pipeline_free(q);
  std::filesystem::remove_all(dir);
}

TEST(CApi, IdentityInitNeedsSquareProjection) {
  m2se_pipeline_config cfg;
  m2se_pipeline_config_default(&cfg);
  EXPECT_EQ(cfg.d_in, 768u);
  EXPECT_EQ(cfg.d_model, 512u);
  m2se_pipeline* p = nullptr;
  EXPECT_EQ(m2se_pipeline_create(&cfg, M2SE_INIT_IDENTITY, 0, &p), M2SE_ERR_INVALID_ARGUMENT);
}

TEST(CApi, SweepCapacityContract) {
  Bundle a = generate(6, 16, 6), b = generate(7, 16, 6);
  const m2se_bundle* bundles[] = {a.get(), b.get()};
  m2se_pipeline* p = small_pipeline(3);
  const std::uint32_t ks[] = {8, 2, 4, 8};
  std::size_t needed = 0;
  ASSERT_EQ(m2se_topk_sweep(p, bundles, 2, ks, 4, nullptr, 0, &needed), M2SE_OK);
  EXPECT_EQ(needed, 6u);
  std::vector<m2se_sweep_row> rows(needed);
  EXPECT_EQ(m2se_topk_sweep(p, bundles, 2, ks, 4, rows.data(), 5, &needed), M2SE_ERR_INVALID_ARGUMENT);
  ASSERT_EQ(m2se_topk_sweep(p, bundles, 2, ks, 4, rows.data(), rows.size(), &needed), M2SE_OK);
  EXPECT_EQ(rows[0].k, 2u);
  EXPECT_EQ(rows[0].mode, M2SE_MODE_SHARED);
  EXPECT_EQ(rows[1].mode, M2SE_MODE_UNSHARED);
  EXPECT_EQ(rows[5].k, 8u);
  EXPECT_EQ(rows[5].mean_hv_distance, 0.0);
  EXPECT_EQ(rows[0].bundles, 2u);
  m2se_pipeline_free(p);
}

TEST(CApi, AudioMetricsAndGriffinLim) {
  const auto dir = oracle::scratch_dir("capi-a");
  const std::vector<float> s = oracle::decaying_noise(0.5, 2.0, 16000, 1);
  m2se_waveform* w = nullptr;
  ASSERT_EQ(m2se_waveform_create(s.data(), s.size(), 16000, &w), M2SE_OK);
  double rt = 0.0;
  ASSERT_EQ(m2se_rt60(w, &rt), M2SE_OK);
  EXPECT_NEAR(rt, 0.5, 0.05);
  double e = 1.0;
  ASSERT_EQ(m2se_rte(w, w, &e), M2SE_OK);
  EXPECT_EQ(e, 0.0);

  const std::string wav = (dir / "a.wav").string();
  ASSERT_EQ(m2se_wav_write(w, wav.c_str(), M2SE_WAV_FLOAT32), M2SE_OK);
  m2se_waveform* r = nullptr;
  ASSERT_EQ(m2se_wav_read(wav.c_str(), &r), M2SE_OK);
  const float* data = nullptr;
  std::size_t n = 0;
  std::uint32_t rate = 0;
  ASSERT_EQ(m2se_waveform_data(r, &data, &n, &rate), M2SE_OK);
  EXPECT_EQ(std::vector<float>(data, data + n), s);
  EXPECT_EQ(rate, 16000u);

  m2se_mel* mel = nullptr;
  ASSERT_EQ(m2se_mel_compute(w, &mel), M2SE_OK);
  const double* md = nullptr;
  std::size_t frames = 0, bands = 0;
  ASSERT_EQ(m2se_mel_data(mel, &md, &frames, &bands), M2SE_OK);
  EXPECT_EQ(frames, 125u);
  EXPECT_EQ(bands, 80u);
  double d = 1.0;
  ASSERT_EQ(m2se_mcd(mel, mel, &d), M2SE_OK);
  EXPECT_EQ(d, 0.0);
  const std::string melp = (dir / "a.mel").string();
  ASSERT_EQ(m2se_mel_save(mel, melp.c_str()), M2SE_OK);
  m2se_mel* mel2 = nullptr;
  ASSERT_EQ(m2se_mel_load(melp.c_str(), 16000, &mel2), M2SE_OK);
  ASSERT_EQ(m2se_mcd(mel, mel2, &d), M2SE_OK);
  EXPECT_LT(d, 1e-3);

  m2se_waveform* g = nullptr;
  ASSERT_EQ(m2se_griffin_lim(mel, 4, 1, &g), M2SE_OK);
  ASSERT_EQ(m2se_waveform_data(g, &data, &n, &rate), M2SE_OK);
  EXPECT_GT(n, 0u);

  m2se_metric_row row;
  ASSERT_EQ(m2se_evaluate_pair(w, w, &row), M2SE_OK);
  EXPECT_TRUE(row.has_rte);
  EXPECT_EQ(row.rte, 0.0);
  EXPECT_EQ(row.mcd, 0.0);

  // RT60 failure on a flat signal is reported, not fatal.
  std::vector<float> flat(32000, 0.2f);
  m2se_waveform* f = nullptr;
  ASSERT_EQ(m2se_waveform_create(flat.data(), flat.size(), 16000, &f), M2SE_OK);
  EXPECT_EQ(m2se_rt60(f, &rt), M2SE_ERR_ESTIMATION_FAILED);
  ASSERT_EQ(m2se_evaluate_pair(f, f, &row), M2SE_OK);
  EXPECT_FALSE(row.has_rte);
  EXPECT_TRUE(row.has_mcd);
  EXPECT_STRNE(row.note, "");

  for (m2se_waveform* x : {w, r, g, f}) m2se_waveform_free(x);
  m2se_mel_free(mel);
  m2se_mel_free(mel2);
  std::filesystem::remove_all(dir);
}

TEST(CApi, ToyTrainSampleAndReload) {
  const auto dir = oracle::scratch_dir("capi-t");
  m2se_toy_config cfg;
  m2se_toy_config_default(&cfg);
  cfg.steps = 40;
  m2se_toy_model* model = nullptr;
  ASSERT_EQ(m2se_toy_train(&cfg, &model), M2SE_OK);
  const double* losses = nullptr;
  std::size_t count = 0;
  ASSERT_EQ(m2se_toy_losses(model, &losses, &count), M2SE_OK);
  EXPECT_EQ(count, 40u);

  Bundle b = generate(9, 8, 6);
  double patch[8];
  std::uint32_t frames = 0, bins = 0;
  ASSERT_EQ(m2se_toy_sample(model, b.get(), 3, patch, 8, &frames, &bins), M2SE_OK);
  EXPECT_EQ(frames, 2u);
  EXPECT_EQ(bins, 4u);
  EXPECT_EQ(m2se_toy_sample(model, b.get(), 3, patch, 7, &frames, &bins), M2SE_ERR_INVALID_ARGUMENT);

  const std::string path = (dir / "toy.m2ck").string();
  ASSERT_EQ(m2se_toy_save(model, path.c_str()), M2SE_OK);
  m2se_toy_model* back = nullptr;
  ASSERT_EQ(m2se_toy_load(path.c_str(), &back), M2SE_OK);
  double again[8];
  ASSERT_EQ(m2se_toy_sample(back, b.get(), 3, again, 8, &frames, &bins), M2SE_OK);
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(again[i], patch[i], 1e-3);

  m2se_mel* mel = nullptr;
  ASSERT_EQ(m2se_toy_patch_to_mel(patch, frames, bins, 4, 16000, &mel), M2SE_OK);
  const double* md = nullptr;
  std::size_t nf = 0, nb = 0;
  ASSERT_EQ(m2se_mel_data(mel, &md, &nf, &nb), M2SE_OK);
  EXPECT_EQ(nf, 8u);
  EXPECT_EQ(nb, 80u);
  m2se_mel_free(mel);

  cfg.k = 9;  // larger than m
  m2se_toy_model* bad = nullptr;
  EXPECT_EQ(m2se_toy_train(&cfg, &bad), M2SE_ERR_INVALID_ARGUMENT);
  m2se_toy_free(model);
  m2se_toy_free(back);
  std::filesystem::remove_all(dir);
}
