// m2se-cli: batch front end over the m2se C library.
//
// Exit codes: 0 success, 1 runtime or partial failure, 2 usage/config error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "m2se/m2se.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(m2se_status s, const std::string& context) {
  if (s != M2SE_OK) {
    throw RuntimeFailure(context + ": " + m2se_status_name(s) + ": " + m2se_last_error());
  }
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};

using Bundle = std::unique_ptr<m2se_bundle, Deleter<m2se_bundle, m2se_bundle_free>>;
using Pipeline = std::unique_ptr<m2se_pipeline, Deleter<m2se_pipeline, m2se_pipeline_free>>;
using Embedding = std::unique_ptr<m2se_embedding, Deleter<m2se_embedding, m2se_embedding_free>>;
using Wave = std::unique_ptr<m2se_waveform, Deleter<m2se_waveform, m2se_waveform_free>>;
using Mel = std::unique_ptr<m2se_mel, Deleter<m2se_mel, m2se_mel_free>>;
using Toy = std::unique_ptr<m2se_toy_model, Deleter<m2se_toy_model, m2se_toy_free>>;
using Ckpt = std::unique_ptr<m2se_checkpoint, Deleter<m2se_checkpoint, m2se_checkpoint_free>>;

Bundle load_bundle(const std::string& path) {
  m2se_bundle* b = nullptr;
  check(m2se_bundle_load(path.c_str(), &b), path);
  return Bundle(b);
}

Wave load_wave(const std::string& path) {
  m2se_waveform* w = nullptr;
  check(m2se_wav_read(path.c_str(), &w), path);
  return Wave(w);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure(dir + ": cannot create directory: " + ec.message());
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw RuntimeFailure(path.string() + ": cannot open for writing");
  return out;
}

void write_f32(const fs::path& path, const double* v, size_t n) {
  std::ofstream out = open_out(path, true);
  for (size_t i = 0; i < n; ++i) {
    const float f = static_cast<float>(v[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    const unsigned char b[4] = {static_cast<unsigned char>(bits),
                                static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16),
                                static_cast<unsigned char>(bits >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!out) throw RuntimeFailure(path.string() + ": write failed");
}

// Files in dir with the given extension, sorted by filename.
std::vector<fs::path> list_files(const std::string& dir, const std::string& ext) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw UsageError(dir + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// Settings shared by every subcommand, settable from --config or flags.
struct RunConfig {
  std::uint32_t topk = 140;
  std::string mode = "shared";
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  std::uint32_t d_model = 512;
  std::uint32_t heads_detector = 2;
  std::uint32_t heads_other = 4;
  std::uint32_t sample_rate = 16000;
  std::uint64_t seed = 0;

  CLI::Option* topk_opt = nullptr;
  CLI::Option* lambda1_opt = nullptr;
  CLI::Option* lambda2_opt = nullptr;
  CLI::Option* d_model_opt = nullptr;
  CLI::Option* heads_detector_opt = nullptr;
  CLI::Option* heads_other_opt = nullptr;

  m2se_mode mode_value() const {
    return mode == "unshared" ? M2SE_MODE_UNSHARED : M2SE_MODE_SHARED;
  }

  void validate() const {
    if (topk < 1) throw UsageError("topk must be >= 1");
    if (d_model == 0 || heads_detector == 0 || heads_other == 0) {
      throw UsageError("d_model and head counts must be positive");
    }
    if (d_model % heads_detector != 0 || d_model % heads_other != 0) {
      throw UsageError("head counts must divide d_model");
    }
  }
};

void add_run_options(CLI::App& app, RunConfig& rc) {
  rc.topk_opt = app.add_option("--topk", rc.topk, "Number of salient patches kept")
                    ->capture_default_str();
  app.add_option("--mode", rc.mode, "Top-k index mode")
      ->check(CLI::IsMember({"shared", "unshared"}))
      ->capture_default_str();
  rc.lambda1_opt = app.add_option("--lambda1", rc.lambda1, "RGB fusion weight")
                       ->capture_default_str();
  rc.lambda2_opt = app.add_option("--lambda2", rc.lambda2, "Depth fusion weight")
                       ->capture_default_str();
  rc.d_model_opt =
      app.add_option("--d-model,--d_model", rc.d_model, "Hidden width")->capture_default_str();
  rc.heads_detector_opt = app.add_option("--heads-detector,--heads_detector", rc.heads_detector,
                                         "Heads in the semantic patch detector")
                              ->capture_default_str();
  rc.heads_other_opt = app.add_option("--heads-other,--heads_other", rc.heads_other,
                                      "Heads in the other attention stages")
                           ->capture_default_str();
  app.add_option("--sample-rate,--sample_rate", rc.sample_rate, "Audio sample rate")
      ->capture_default_str();
  app.add_option("--seed", rc.seed, "Seed for all randomness")->capture_default_str();
}

bool given(const CLI::Option* opt) { return opt && opt->count() > 0; }

/* ---- shared pipeline construction ---- */

struct PipelineSource {
  std::string checkpoint;
  std::string init = "xavier";
};

void add_pipeline_options(CLI::App& sub, PipelineSource& src) {
  sub.add_option("--checkpoint", src.checkpoint, "M2CK pipeline checkpoint");
  sub.add_option("--init", src.init, "Initialisation when no checkpoint is given")
      ->check(CLI::IsMember({"xavier", "identity"}))
      ->capture_default_str();
}

Pipeline make_pipeline(const PipelineSource& src, const RunConfig& rc, std::uint32_t d_in) {
  m2se_pipeline* p = nullptr;
  if (!src.checkpoint.empty()) {
    check(m2se_pipeline_load(src.checkpoint.c_str(), &p), src.checkpoint);
    Pipeline owned(p);
    m2se_pipeline_config cfg;
    check(m2se_pipeline_get_config(p, &cfg), src.checkpoint);
    auto mismatch = [&](const CLI::Option* opt, std::uint32_t want, std::uint32_t have,
                        const char* what) {
      if (given(opt) && want != have) {
        throw UsageError(src.checkpoint + ": checkpoint " + what + " " + std::to_string(have) +
                         " does not match configured " + std::to_string(want));
      }
    };
    mismatch(rc.d_model_opt, rc.d_model, cfg.d_model, "d_model");
    mismatch(rc.heads_detector_opt, rc.heads_detector, cfg.heads_detector, "heads_detector");
    mismatch(rc.heads_other_opt, rc.heads_other, cfg.heads_other, "heads_other");
    if (d_in != 0 && cfg.d_in != d_in) {
      throw UsageError(src.checkpoint + ": checkpoint expects feature width " +
                       std::to_string(cfg.d_in) + ", bundles have " + std::to_string(d_in));
    }
    if (given(rc.lambda1_opt) || given(rc.lambda2_opt)) {
      check(m2se_pipeline_set_lambdas(p, given(rc.lambda1_opt) ? rc.lambda1 : cfg.lambda1,
                                      given(rc.lambda2_opt) ? rc.lambda2 : cfg.lambda2),
            "lambdas");
    }
    return owned;
  }
  if (d_in == 0) throw UsageError("no readable bundle to infer the feature width from");
  m2se_pipeline_config cfg{d_in, rc.d_model, rc.heads_detector, rc.heads_other, rc.lambda1,
                           rc.lambda2};
  const m2se_init init = src.init == "identity" ? M2SE_INIT_IDENTITY : M2SE_INIT_XAVIER;
  check(m2se_pipeline_create(&cfg, init, rc.seed, &p), "pipeline");
  return Pipeline(p);
}

/* ---- fuse ---- */

struct FuseArgs {
  std::vector<std::string> bundles;
  PipelineSource pipeline;
  std::string out;
};

struct FuseRow {
  std::string sample_id;
  std::string file;
  std::vector<double> hv;
  std::vector<std::uint32_t> omega;
  double rgb_mass = 0.0;
  double depth_mass = 0.0;
};

int cmd_fuse(const FuseArgs& args, const RunConfig& rc) {
  int failures = 0;
  std::vector<std::pair<std::string, Bundle>> loaded;
  for (const std::string& path : args.bundles) {
    try {
      loaded.emplace_back(path, load_bundle(path));
    } catch (const RuntimeFailure& e) {
      std::cerr << "error: " << e.what() << "\n";
      ++failures;
    }
  }
  std::uint32_t d_in = 0;
  if (!loaded.empty()) {
    m2se_bundle_info info;
    check(m2se_bundle_get_info(loaded.front().second.get(), &info), loaded.front().first);
    d_in = info.d;
  }
  if (loaded.empty() && args.pipeline.checkpoint.empty()) {
    std::cerr << "error: no readable bundles\n";
    return kExitFailure;
  }
  Pipeline pipeline = make_pipeline(args.pipeline, rc, args.pipeline.checkpoint.empty() ? d_in : 0);
  ensure_dir(args.out);

  std::vector<FuseRow> rows;
  for (const auto& [path, bundle] : loaded) {
    try {
      m2se_embedding* raw = nullptr;
      check(m2se_embed(pipeline.get(), bundle.get(), rc.topk, rc.mode_value(), &raw), path);
      Embedding e(raw);
      m2se_bundle_info info;
      check(m2se_bundle_get_info(bundle.get(), &info), path);
      FuseRow row;
      row.sample_id = info.sample_id;
      row.file = fs::path(path).stem().string() + ".f32";
      const double* hv = nullptr;
      size_t n = 0;
      check(m2se_embedding_hv(e.get(), &hv, &n), path);
      row.hv.assign(hv, hv + n);
      const std::uint32_t* idx = nullptr;
      size_t k = 0;
      check(m2se_embedding_indices(e.get(), 0, &idx, &k), path);
      row.omega.assign(idx, idx + k);
      check(m2se_embedding_selected_mass(e.get(), &row.rgb_mass, &row.depth_mass), path);
      write_f32(fs::path(args.out) / row.file, row.hv.data(), row.hv.size());
      rows.push_back(std::move(row));
    } catch (const RuntimeFailure& e) {
      std::cerr << "error: " << e.what() << "\n";
      ++failures;
    }
  }
  std::sort(rows.begin(), rows.end(), [](const FuseRow& a, const FuseRow& b) {
    return a.sample_id != b.sample_id ? a.sample_id < b.sample_id : a.file < b.file;
  });

  std::ofstream summary = open_out(fs::path(args.out) / "summary.csv");
  summary << "sample_id,file,mode,k,rgb_mass,depth_mass,rgb_indices\n";
  std::ofstream hv_csv = open_out(fs::path(args.out) / "hv.csv");
  for (const FuseRow& r : rows) {
    summary << r.sample_id << "," << r.file << "," << rc.mode << "," << r.omega.size() << ","
            << fmt(r.rgb_mass) << "," << fmt(r.depth_mass) << ",";
    for (size_t i = 0; i < r.omega.size(); ++i) summary << (i ? " " : "") << r.omega[i];
    summary << "\n";
    hv_csv << r.sample_id << "," << rc.mode << "," << r.omega.size();
    for (double v : r.hv) hv_csv << "," << fmt(static_cast<float>(v));
    hv_csv << "\n";
  }
  std::cout << "fused " << rows.size() << " of " << args.bundles.size() << " bundles into "
            << args.out << "\n";
  return failures ? kExitFailure : kExitOk;
}

/* ---- topk-sweep ---- */

struct SweepArgs {
  std::string dir;
  PipelineSource pipeline;
  std::vector<std::uint32_t> ks;
  std::string out;
};

int cmd_topk_sweep(const SweepArgs& args, const RunConfig& rc) {
  std::vector<Bundle> bundles;
  for (const fs::path& p : list_files(args.dir, ".m2fb")) bundles.push_back(load_bundle(p.string()));
  if (bundles.empty()) throw UsageError(args.dir + ": no .m2fb bundles found");
  m2se_bundle_info info;
  check(m2se_bundle_get_info(bundles.front().get(), &info), "bundle");
  Pipeline pipeline =
      make_pipeline(args.pipeline, rc, args.pipeline.checkpoint.empty() ? info.d : 0);

  std::vector<std::uint32_t> ks = args.ks;
  if (ks.empty()) {
    for (std::uint32_t k = 20; k <= 240; k += 20) ks.push_back(k);
  }
  std::vector<const m2se_bundle*> views;
  for (const Bundle& b : bundles) views.push_back(b.get());
  size_t needed = 0;
  check(m2se_topk_sweep(pipeline.get(), views.data(), views.size(), ks.data(), ks.size(), nullptr,
                        0, &needed),
        "topk-sweep");
  std::vector<m2se_sweep_row> rows(needed);
  check(m2se_topk_sweep(pipeline.get(), views.data(), views.size(), ks.data(), ks.size(),
                        rows.data(), rows.size(), &needed),
        "topk-sweep");

  std::ostringstream csv;
  csv << "k,mode,mean_hv_distance,mean_selected_mass,bundles\n";
  for (const m2se_sweep_row& r : rows) {
    csv << r.k << "," << (r.mode == M2SE_MODE_SHARED ? "shared" : "unshared") << ","
        << fmt(r.mean_hv_distance) << "," << fmt(r.mean_selected_mass) << "," << r.bundles
        << "\n";
  }
  if (args.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out = open_out(args.out);
    out << csv.str();
    std::cout << "wrote " << rows.size() << " rows to " << args.out << "\n";
  }
  return kExitOk;
}

/* ---- eval ---- */

struct EvalArgs {
  std::string ref_dir;
  std::string syn_dir;
  std::size_t samples = 0;
  std::string out;
};

std::string opt_field(int has, double v) { return has ? fmt(v) : std::string(); }

int cmd_eval(const EvalArgs& args, const RunConfig& rc) {
  const std::vector<fs::path> refs = list_files(args.ref_dir, ".wav");
  const std::vector<fs::path> syns = list_files(args.syn_dir, ".wav");
  std::map<std::string, fs::path> syn_by_name;
  for (const fs::path& p : syns) syn_by_name[p.filename().string()] = p;

  std::vector<std::pair<fs::path, fs::path>> pairs;
  std::vector<std::string> unpaired;
  for (const fs::path& r : refs) {
    auto it = syn_by_name.find(r.filename().string());
    if (it == syn_by_name.end()) {
      unpaired.push_back(r.string());
    } else {
      pairs.emplace_back(r, it->second);
      syn_by_name.erase(it);
    }
  }
  for (const auto& [name, path] : syn_by_name) unpaired.push_back(path.string());
  std::sort(unpaired.begin(), unpaired.end());
  for (const std::string& u : unpaired) std::cerr << "unpaired: " << u << "\n";
  if (pairs.empty()) {
    std::cerr << "error: no pairs found\n";
    return kExitFailure;
  }
  if (args.samples > 0 && args.samples < pairs.size()) {
    std::mt19937_64 rng(rc.seed);
    std::vector<std::pair<fs::path, fs::path>> chosen;
    std::sample(pairs.begin(), pairs.end(), std::back_inserter(chosen), args.samples, rng);
    pairs = std::move(chosen);
  }

  int failures = 0;
  std::size_t skipped = 0, rte_count = 0, mcd_count = 0;
  double rte_sum = 0.0, mcd_sum = 0.0;
  std::ostringstream csv;
  csv << "sample_id,rt60_ref,rt60_syn,rte,mcd\n";
  for (const auto& [ref_path, syn_path] : pairs) {
    const std::string id = ref_path.stem().string();
    try {
      Wave ref = load_wave(ref_path.string());
      Wave syn = load_wave(syn_path.string());
      m2se_metric_row row;
      check(m2se_evaluate_pair(ref.get(), syn.get(), &row), id);
      csv << id << "," << opt_field(row.has_rt60_ref, row.rt60_ref) << ","
          << opt_field(row.has_rt60_syn, row.rt60_syn) << "," << opt_field(row.has_rte, row.rte)
          << "," << opt_field(row.has_mcd, row.mcd) << "\n";
      if (row.has_rte) {
        rte_sum += row.rte;
        ++rte_count;
      } else {
        ++skipped;
        std::cerr << "skipped rte: " << id << ": " << row.note << "\n";
      }
      if (row.has_mcd) {
        mcd_sum += row.mcd;
        ++mcd_count;
      }
    } catch (const RuntimeFailure& e) {
      std::cerr << "error: " << e.what() << "\n";
      ++failures;
    }
  }
  csv << "mean,,," << (rte_count ? fmt(rte_sum / rte_count) : "") << ","
      << (mcd_count ? fmt(mcd_sum / mcd_count) : "") << "\n";
  if (args.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out = open_out(args.out);
    out << csv.str();
  }
  std::cerr << "pairs " << pairs.size() << ", skipped " << skipped << ", unpaired "
            << unpaired.size() << ", errors " << failures << "\n";
  return failures ? kExitFailure : kExitOk;
}

/* ---- mel ---- */

struct MelArgs {
  std::vector<std::string> wavs;
  std::string out;
};

int cmd_mel(const MelArgs& args, const RunConfig& rc) {
  ensure_dir(args.out);
  int failures = 0;
  for (const std::string& path : args.wavs) {
    try {
      Wave w = load_wave(path);
      std::uint32_t rate = 0;
      check(m2se_waveform_data(w.get(), nullptr, nullptr, &rate), path);
      if (rate != rc.sample_rate) {
        throw RuntimeFailure(path + ": sample rate " + std::to_string(rate) +
                             " differs from configured " + std::to_string(rc.sample_rate));
      }
      m2se_mel* raw = nullptr;
      check(m2se_mel_compute(w.get(), &raw), path);
      Mel mel(raw);
      const fs::path target = fs::path(args.out) / (fs::path(path).stem().string() + ".mel.f32");
      check(m2se_mel_save(mel.get(), target.string().c_str()), target.string());
    } catch (const RuntimeFailure& e) {
      std::cerr << "error: " << e.what() << "\n";
      ++failures;
    }
  }
  return failures ? kExitFailure : kExitOk;
}

/* ---- gen-fixtures ---- */

struct GenArgs {
  std::uint32_t count = 4;
  std::uint32_t m = 256;
  std::uint32_t d = 768;
  std::string scenario = "planted";
  std::string out;
};

int cmd_gen_fixtures(const GenArgs& args, const RunConfig& rc) {
  ensure_dir(args.out);
  const m2se_scenario scenario = args.scenario == "uniform"     ? M2SE_SCENARIO_UNIFORM
                                 : args.scenario == "clustered" ? M2SE_SCENARIO_CLUSTERED
                                                                : M2SE_SCENARIO_PLANTED;
  for (std::uint32_t i = 0; i < args.count; ++i) {
    m2se_bundle* raw = nullptr;
    check(m2se_bundle_generate(rc.seed + i, args.m, args.d, scenario, &raw), "gen-fixtures");
    Bundle b(raw);
    m2se_bundle_info info;
    check(m2se_bundle_get_info(b.get(), &info), "gen-fixtures");
    const fs::path target = fs::path(args.out) / (std::string(info.sample_id) + ".m2fb");
    check(m2se_bundle_save(b.get(), target.string().c_str(), nullptr), target.string());
  }
  std::cout << "wrote " << args.count << " bundles to " << args.out << "\n";
  return kExitOk;
}

/* ---- train-toy ---- */

struct TrainArgs {
  m2se_toy_config cfg{};
  std::string out;
};

int cmd_train_toy(TrainArgs& args, const RunConfig& rc) {
  m2se_toy_config cfg = args.cfg;
  if (given(rc.topk_opt)) cfg.k = rc.topk;
  if (given(rc.d_model_opt)) cfg.d_model = rc.d_model;
  if (given(rc.heads_detector_opt)) cfg.heads_detector = rc.heads_detector;
  if (given(rc.heads_other_opt)) cfg.heads_other = rc.heads_other;
  cfg.mode = rc.mode_value();
  cfg.seed = rc.seed;

  m2se_toy_model* raw = nullptr;
  check(m2se_toy_train(&cfg, &raw), "train-toy");
  Toy model(raw);
  ensure_dir(args.out);
  const fs::path ck = fs::path(args.out) / "toy.m2ck";
  check(m2se_toy_save(model.get(), ck.string().c_str()), ck.string());

  const double* losses = nullptr;
  size_t n = 0;
  check(m2se_toy_losses(model.get(), &losses, &n), "train-toy");
  std::ofstream csv = open_out(fs::path(args.out) / "losses.csv");
  csv << "step,loss\n";
  for (size_t i = 0; i < n; ++i) csv << i << "," << fmt(losses[i]) << "\n";
  if (n >= 10) {
    double first = 0.0, last = 0.0;
    for (size_t i = 0; i < 10; ++i) {
      first += losses[i];
      last += losses[n - 10 + i];
    }
    std::cout << "first-10 mean " << fmt(first / 10) << ", final-10 mean " << fmt(last / 10)
              << ", ratio " << fmt(last / first) << "\n";
  }
  std::cout << "checkpoint " << ck.string() << "\n";
  return kExitOk;
}

/* ---- synth-toy ---- */

struct SynthArgs {
  std::string checkpoint;
  std::vector<std::string> bundles;
  std::string out;
  bool wav = false;
  std::uint32_t frame_repeat = 16;
  std::uint32_t iterations = 32;
};

int cmd_synth_toy(const SynthArgs& args, const RunConfig& rc) {
  m2se_toy_model* raw = nullptr;
  check(m2se_toy_load(args.checkpoint.c_str(), &raw), args.checkpoint);
  Toy model(raw);
  ensure_dir(args.out);
  int failures = 0;
  for (size_t i = 0; i < args.bundles.size(); ++i) {
    const std::string& path = args.bundles[i];
    try {
      Bundle b = load_bundle(path);
      std::vector<double> patch(1 << 16);
      std::uint32_t frames = 0, bins = 0;
      check(m2se_toy_sample(model.get(), b.get(), rc.seed + i, patch.data(), patch.size(),
                            &frames, &bins),
            path);
      const std::string stem = fs::path(path).stem().string();
      std::ofstream csv = open_out(fs::path(args.out) / (stem + ".patch.csv"));
      for (std::uint32_t f = 0; f < frames; ++f) {
        for (std::uint32_t j = 0; j < bins; ++j) {
          csv << (j ? "," : "") << fmt(patch[static_cast<size_t>(f) * bins + j]);
        }
        csv << "\n";
      }
      m2se_mel* mraw = nullptr;
      check(m2se_toy_patch_to_mel(patch.data(), frames, bins, args.frame_repeat, rc.sample_rate,
                                  &mraw),
            path);
      Mel mel(mraw);
      const fs::path mel_path = fs::path(args.out) / (stem + ".mel.f32");
      check(m2se_mel_save(mel.get(), mel_path.string().c_str()), mel_path.string());
      if (args.wav) {
        m2se_waveform* wraw = nullptr;
        check(m2se_griffin_lim(mel.get(), args.iterations, rc.seed + i, &wraw), path);
        Wave w(wraw);
        const fs::path wav_path = fs::path(args.out) / (stem + ".wav");
        check(m2se_wav_write(w.get(), wav_path.string().c_str(), M2SE_WAV_PCM16),
              wav_path.string());
      }
    } catch (const RuntimeFailure& e) {
      std::cerr << "error: " << e.what() << "\n";
      ++failures;
    }
  }
  return failures ? kExitFailure : kExitOk;
}

/* ---- inspect ---- */

int inspect_one(const std::string& path) {
  char magic[4] = {};
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFailure(path + ": cannot open");
    in.read(magic, 4);
  }
  const std::string tag(magic, 4);
  std::cout << path << "\n";
  if (tag == "M2FB") {
    Bundle b = load_bundle(path);
    m2se_bundle_info info;
    check(m2se_bundle_get_info(b.get(), &info), path);
    std::cout << "  feature bundle: sample_id " << info.sample_id << ", m " << info.m << ", d "
              << info.d << "\n";
    if (info.caption) std::cout << "  caption: " << info.caption << "\n";
  } else if (tag == "M2CK") {
    m2se_checkpoint* raw = nullptr;
    check(m2se_checkpoint_open(path.c_str(), &raw), path);
    Ckpt ck(raw);
    size_t n = 0;
    check(m2se_checkpoint_count(ck.get(), &n), path);
    std::cout << "  checkpoint: " << n << " tensors\n";
    for (size_t i = 0; i < n; ++i) {
      const char* name = nullptr;
      const std::uint32_t* dims = nullptr;
      size_t rank = 0, elements = 0;
      check(m2se_checkpoint_entry(ck.get(), i, &name, &dims, &rank, &elements), path);
      std::cout << "  " << name << " [";
      for (size_t r = 0; r < rank; ++r) std::cout << (r ? "x" : "") << dims[r];
      std::cout << "] " << elements << "\n";
    }
  } else if (tag == "RIFF") {
    Wave w = load_wave(path);
    size_t count = 0;
    std::uint32_t rate = 0;
    check(m2se_waveform_data(w.get(), nullptr, &count, &rate), path);
    std::cout << "  wav: " << count << " samples at " << rate << " Hz ("
              << fmt(static_cast<double>(count) / rate) << " s)\n";
  } else {
    m2se_mel* raw = nullptr;
    check(m2se_mel_load(path.c_str(), 16000, &raw), path);
    Mel mel(raw);
    size_t frames = 0, bands = 0;
    check(m2se_mel_data(mel.get(), nullptr, &frames, &bands), path);
    std::cout << "  mel: " << frames << " frames x " << bands << " bands\n";
  }
  return kExitOk;
}

int cmd_inspect(const std::vector<std::string>& files) {
  int failures = 0;
  for (const std::string& f : files) {
    try {
      inspect_one(f);
    } catch (const RuntimeFailure& e) {
      std::cerr << "error: " << e.what() << "\n";
      ++failures;
    }
  }
  return failures ? kExitFailure : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"m2se-cli: environment embeddings, acoustic metrics and toy diffusion"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value configuration file");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_version_flag("--version", std::string(m2se_version()));

  RunConfig rc;
  add_run_options(app, rc);

  FuseArgs fuse;
  CLI::App* fuse_cmd = app.add_subcommand("fuse", "Compute h_v for each bundle");
  fuse_cmd->add_option("bundles", fuse.bundles, "Input .m2fb files")->required();
  add_pipeline_options(*fuse_cmd, fuse.pipeline);
  fuse_cmd->add_option("--out,-o", fuse.out, "Output directory")->required();

  SweepArgs sweep;
  CLI::App* sweep_cmd = app.add_subcommand("topk-sweep", "Sweep k in both Top-k modes");
  sweep_cmd->add_option("dir", sweep.dir, "Directory of .m2fb bundles")->required();
  add_pipeline_options(*sweep_cmd, sweep.pipeline);
  sweep_cmd->add_option("--k-list", sweep.ks, "k values (default 20,40,...,240)")->delimiter(',');
  sweep_cmd->add_option("--out,-o", sweep.out, "CSV path (default stdout)");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "RTE and MCD over paired WAV directories");
  eval_cmd->add_option("ref_dir", eval.ref_dir, "Reference WAVs")->required();
  eval_cmd->add_option("syn_dir", eval.syn_dir, "Synthesized WAVs")->required();
  eval_cmd->add_option("--samples", eval.samples, "Evaluate a seeded random subset of pairs");
  eval_cmd->add_option("--out,-o", eval.out, "CSV path (default stdout)");

  MelArgs mel;
  CLI::App* mel_cmd = app.add_subcommand("mel", "Log-mel spectrograms of WAV files");
  mel_cmd->add_option("wavs", mel.wavs, "Input WAV files")->required();
  mel_cmd->add_option("--out,-o", mel.out, "Output directory")->required();

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-fixtures", "Write synthetic feature bundles");
  gen_cmd->add_option("--count", gen.count)->capture_default_str();
  gen_cmd->add_option("--m", gen.m, "Patches per bundle")->capture_default_str();
  gen_cmd->add_option("--d", gen.d, "Feature width")->capture_default_str();
  gen_cmd->add_option("--scenario", gen.scenario)
      ->check(CLI::IsMember({"uniform", "clustered", "planted"}))
      ->capture_default_str();
  gen_cmd->add_option("--out,-o", gen.out, "Output directory")->required();

  TrainArgs train;
  m2se_toy_config_default(&train.cfg);
  CLI::App* train_cmd = app.add_subcommand("train-toy", "Train the toy conditioned denoiser");
  train_cmd->add_option("--steps", train.cfg.steps)->capture_default_str();
  train_cmd->add_option("--lr", train.cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--samples", train.cfg.samples, "Training bundles")->capture_default_str();
  train_cmd->add_option("--m", train.cfg.m, "Patches per bundle")->capture_default_str();
  train_cmd->add_option("--d", train.cfg.d, "Feature width")->capture_default_str();
  train_cmd->add_option("--hidden", train.cfg.d_hidden, "Denoiser width")->capture_default_str();
  train_cmd->add_option("--t-max", train.cfg.t_max, "Diffusion steps")->capture_default_str();
  train_cmd->add_option("--eval-draws", train.cfg.eval_draws)->capture_default_str();
  train_cmd->add_option("--out,-o", train.out, "Output directory")->required();

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth-toy", "Sample patches from a toy checkpoint");
  synth_cmd->add_option("bundles", synth.bundles, "Conditioning .m2fb files")->required();
  synth_cmd->add_option("--checkpoint", synth.checkpoint, "Toy M2CK checkpoint")->required();
  synth_cmd->add_option("--out,-o", synth.out, "Output directory")->required();
  synth_cmd->add_flag("--wav", synth.wav, "Also write a Griffin-Lim WAV");
  synth_cmd->add_option("--frame-repeat", synth.frame_repeat)->capture_default_str();
  synth_cmd->add_option("--iterations", synth.iterations, "Griffin-Lim iterations")
      ->capture_default_str();

  std::vector<std::string> inspect_files;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "Describe .m2fb, M2CK, WAV or mel files");
  inspect_cmd->add_option("files", inspect_files)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    rc.validate();
    if (*fuse_cmd) return cmd_fuse(fuse, rc);
    if (*sweep_cmd) return cmd_topk_sweep(sweep, rc);
    if (*eval_cmd) return cmd_eval(eval, rc);
    if (*mel_cmd) return cmd_mel(mel, rc);
    if (*gen_cmd) return cmd_gen_fixtures(gen, rc);
    if (*train_cmd) return cmd_train_toy(train, rc);
    if (*synth_cmd) return cmd_synth_toy(synth, rc);
    if (*inspect_cmd) return cmd_inspect(inspect_files);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
