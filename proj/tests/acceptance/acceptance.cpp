// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures (capped at 1).
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "m2se/diffusion.hpp"
#include "m2se/feature_io.hpp"
#include "m2se/global_fusion.hpp"
#include "m2se/grad_check.hpp"
#include "m2se/local_spatial.hpp"
#include "m2se/metrics.hpp"
#include "m2se/rng.hpp"
#include "oracles.hpp"

using namespace m2se;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < limit_s;
  const bool pass = o.ok && in_time;
  if (!pass) ++failures;
  std::printf("%s  %-22s %s [%.2fs, limit %.0fs%s]\n", pass ? "PASS" : "FAIL", name.c_str(),
              o.detail.c_str(), secs, limit_s, in_time ? "" : ", too slow");
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + M2SE_CLI_PATH + "\" " + args + " >>\"" +
                          log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = s.str();
  }
  return files;
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t n) {
  return std::accumulate(v.begin() + from, v.begin() + from + n, 0.0) / static_cast<double>(n);
}

std::vector<double> dct_basis(std::size_t k, std::size_t n) {
  const double pi = 3.14159265358979323846;
  std::vector<double> v(n);
  const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) v[i] = scale * std::cos(pi * (i + 0.5) * k / n);
  return v;
}

Outcome topk_oracle() {
  Rng rng(2024);
  const std::size_t m = 256, k = 140;
  const Matrix proj(m, 1);
  std::size_t mismatches = 0;
  for (int c = 0; c < 1000; ++c) {
    std::vector<double> w(m);
    // Every fourth case is coarsely quantized so ties are common.
    for (double& v : w) v = c % 4 == 3 ? std::floor(rng.uniform() * 8.0) / 8.0 : rng.uniform();
    AttentionOutput att;
    att.avg_weights = Matrix(1, m, w);
    const TopkSelection sel = phi_lsu_topk(att, proj, k);
    if (sel.indices != oracle::topk_by_sort(w, k)) ++mismatches;
  }
  return {mismatches == 0, "1000 cases m=256 k=140, mismatches " + std::to_string(mismatches)};
}

Outcome stochasticity() {
  const PipelineParams p = PipelineParams::xavier({}, 7);
  double worst = 0.0;
  std::size_t rows = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Scenario s = static_cast<Scenario>(i % 3);
    const FeatureBundle b = gen_synthetic_bundle(1000 + i, 256, 768, s);
    const TopkMode mode = i % 2 ? TopkMode::kUnshared : TopkMode::kShared;
    const auto [emb, trace] = compute_environment_embedding(b, p, kDefaultTopk, mode);
    for (const auto& [name, w] : trace.stage_weights) {
      for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto row = w.row(r);
        worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
        ++rows;
      }
    }
  }
  return {worst <= 1e-6, std::to_string(rows) + " rows over 100 bundles, max |sum-1| " + fmt(worst)};
}

Outcome index_sharing() {
  const PipelineParams p = PipelineParams::xavier({64, 64, 2, 4}, 8);
  std::size_t checked = 0;
  bool ok = true;
  for (Scenario s : {Scenario::kUniform, Scenario::kClustered, Scenario::kPlanted}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const FeatureBundle b = gen_synthetic_bundle(seed, 256, 64, s);
      const auto [emb, t] = compute_environment_embedding(b, p, kDefaultTopk, TopkMode::kShared);
      ok &= t.omega == t.omega_depth && t.omega.size() == kDefaultTopk;
      for (std::size_t i = 0; i < t.omega.size(); ++i) {
        for (std::size_t c = 0; c < 64; ++c) {
          ok &= t.h_topk_r(i, c) == t.rgb_patch_proj(t.omega[i], c);
          ok &= t.h_topk_d(i, c) == t.depth_patch_proj(t.omega[i], c);
        }
      }
      ++checked;
    }
  }
  return {ok, std::to_string(checked) + " fixtures, both gathers follow the RGB selection"};
}

Outcome end_to_end_gradient() {
  double worst = 0.0;
  std::string where;
  std::size_t entries = 0;
  for (TopkMode mode : {TopkMode::kShared, TopkMode::kUnshared}) {
    ToyConfig cfg;
    cfg.mode = mode;
    cfg.t_max = 10;
    const auto data = make_toy_dataset(21, 1, 8, 6, cfg);
    ToyModel model = ToyModel::init(cfg, {6, 4, 2, 4}, 21);
    // Non-zero biases so every bias path is exercised.
    Rng rng(22);
    for (const NamedTensor& t : named_tensors(model))
      if (t.name.find(".bias") != std::string::npos)
        for (double& v : t.tensor->values()) v = 0.1 * rng.normal();
    const DiffusionSchedule s = model.schedule();
    Matrix noise(1, cfg.patch_size());
    for (double& v : noise.values()) v = rng.normal();
    ToyModel grad = zeros_like(model);
    toy_loss_and_grad(model, data[0], 6, noise, s, 1.0, grad);
    const std::vector<NamedTensor> tensors = named_tensors(model);
    std::vector<Matrix> analytic;
    for (const NamedTensor& t : named_tensors(grad)) analytic.push_back(*t.tensor);
    const GradCheckReport r =
        grad_check(tensors, analytic, [&] { return toy_loss(model, data[0], 6, noise, s); }, 1e-4);
    entries += r.entries;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = std::string(mode_name(mode)) + " " + r.worst_tensor;
    }
  }
  return {worst <= 1e-3, std::to_string(entries) + " entries, max rel error " + fmt(worst) + " (" +
                             where + ")"};
}

Outcome fusion_arithmetic() {
  const Matrix r(1, 4, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  const Matrix d(1, 4, std::vector<double>{-2.0, 0.5, 8.0, 1.0});
  const std::vector<double> want{-0.5, 1.25, 5.5, 2.5};
  const Matrix half = fuse_hv(r, d, 0.5, 0.5);
  bool ok = std::vector<double>(half.values().begin(), half.values().end()) == want;
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    Matrix a(1, 512), b(1, 512);
    for (double& v : a.values()) v = rng.normal() * 1e3;
    for (double& v : b.values()) v = rng.normal() * 1e-3;
    ok &= fuse_hv(a, b, 1.0, 0.0) == a && fuse_hv(a, b, 0.0, 1.0) == b;
    const Matrix h = fuse_hv(a, b, 0.5, 0.5);
    for (std::size_t j = 0; j < 512; ++j) ok &= h(0, j) == 0.5 * a(0, j) + 0.5 * b(0, j);
  }
  return {ok, "hand-computed (0.5, 0.5) vector and 50 bit-exact selector pairs"};
}

Outcome toy_training() {
  std::string detail;
  bool ok = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    ToyConfig cfg;
    const auto data = make_toy_dataset(seed, 16, 8, 6, cfg);
    TrainOptions opt;
    opt.seed = seed;
    const TrainResult r = train_toy(data, ToyModel::init(cfg, {6, 4, 2, 4}, seed), opt);
    const double ratio = mean_of(r.losses, r.losses.size() - 10, 10) / mean_of(r.losses, 0, 10);
    ok &= r.losses.size() == 300 && ratio <= 0.5;
    detail += (detail.empty() ? "" : ", ") + ("seed " + std::to_string(seed) + " ratio " + fmt(ratio));
  }
  return {ok, "300 steps, final-10/first-10: " + detail};
}

Outcome rt60_recovery() {
  std::string detail;
  bool ok = true;
  for (double t60 : {0.3, 0.5, 1.0}) {
    Waveform w;
    w.samples = oracle::decaying_noise(t60, 2.5, 16000, static_cast<std::uint64_t>(t60 * 100));
    const double est = schroeder_rt60(w);
    ok &= std::abs(est - t60) <= 0.1 * t60;
    detail += (detail.empty() ? "" : ", ") + fmt(t60) + "->" + fmt(est);
  }
  return {ok, "T60 " + detail};
}

Outcome mcd_sanity() {
  const std::size_t frames = 200, bands = 80;
  Rng rng(31);
  MelSpectrogram ref;
  ref.frames = Matrix(frames, bands, -5.0);
  for (std::size_t k = 2; k <= 13; ++k) {
    const std::vector<double> bk = dct_basis(k, bands);
    for (std::size_t t = 0; t < frames; ++t) {
      const double a = rng.normal();
      for (std::size_t i = 0; i < bands; ++i) ref.frames(t, i) += a * bk[i];
    }
  }
  bool ok = mcd(ref, ref) == 0.0;
  Waveform w;
  w.samples = oracle::decaying_noise(0.6, 2.0, 16000, 32);
  const MelSpectrogram real = mel_spectrogram(w);
  ok &= mcd(real, real) == 0.0;
  const std::vector<double> b1 = dct_basis(1, bands);
  double worst = 0.0;
  for (double delta : {0.05, 0.5, 1.0, 3.0}) {
    MelSpectrogram syn = ref;
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t i = 0; i < bands; ++i) syn.frames(t, i) += delta * b1[i];
    worst = std::max(worst, std::abs(mcd(ref, syn) - 10.0 * std::sqrt(2.0) / std::log(10.0) * delta));
  }
  ok &= worst <= 1e-4;
  return {ok, "identity exactly 0, constant c1 offset max error " + fmt(worst) + " dB"};
}

Outcome sweep_structure(const fs::path& work) {
  const fs::path log = work / "sweep.log";
  if (cli("gen-fixtures --count 4 --m 256 --d 64 --scenario planted -o " + (work / "sweep").string(), log))
    return {false, "gen-fixtures failed"};
  const fs::path csv = work / "sweep.csv";
  if (cli("--d-model 64 topk-sweep " + (work / "sweep").string() + " -o " + csv.string(), log))
    return {false, "topk-sweep failed"};
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  struct Row {
    int k;
    std::string mode;
    double dist, mass;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    std::stringstream s(line);
    std::string f[5];
    for (auto& x : f) std::getline(s, x, ',');
    rows.push_back({std::stoi(f[0]), f[1], std::stod(f[2]), std::stod(f[3])});
  }
  bool ok = rows.size() == 24;
  bool monotone = true, differ = false;
  for (std::size_t i = 0; ok && i < rows.size(); ++i) {
    ok &= rows[i].k == static_cast<int>(20 * (i / 2 + 1));
    ok &= rows[i].mode == (i % 2 ? "unshared" : "shared");
    if (i >= 2) monotone &= rows[i].mass >= rows[i - 2].mass;
    if (i % 2) differ |= rows[i].dist != rows[i - 1].dist || rows[i].mass != rows[i - 1].mass;
  }
  return {ok && monotone && differ, std::to_string(rows.size()) + " rows, mass non-decreasing " +
                                        (monotone ? "yes" : "no") + ", modes differ " +
                                        (differ ? "yes" : "no")};
}

Outcome determinism(const fs::path& work) {
  const fs::path log = work / "det.log";
  const std::string big = (work / "big").string(), toy = (work / "toyfx").string();
  if (cli("gen-fixtures --count 3 -o " + big, log) ||
      cli("gen-fixtures --count 3 --m 8 --d 6 -o " + toy, log) ||
      cli("--seed 5 train-toy -o " + (work / "model").string(), log))
    return {false, "fixture or model setup failed"};
  const std::string ck = (work / "model" / "toy.m2ck").string();
  for (const char* run : {"r1", "r2"}) {
    const fs::path out = work / run;
    if (cli("fuse " + big + "/*.m2fb -o " + (out / "fuse").string(), log) ||
        cli("--mode unshared fuse " + big + "/*.m2fb -o " + (out / "fuse-u").string(), log) ||
        cli("--seed 3 synth-toy " + toy + "/*.m2fb --checkpoint " + ck + " --wav -o " +
                (out / "synth").string(),
            log))
      return {false, std::string("cli run ") + run + " failed"};
  }
  const auto a = read_tree(work / "r1"), b = read_tree(work / "r2");
  return {!a.empty() && a == b, std::to_string(a.size()) + " output files compared byte-for-byte"};
}

}  // namespace

int main() {
  const fs::path work = oracle::scratch_dir("acceptance");
  criterion("topk-oracle", 5, topk_oracle);
  criterion("attention-stochastic", 10, stochasticity);
  criterion("index-sharing", 1, index_sharing);
  criterion("e2e-gradient", 60, end_to_end_gradient);
  criterion("fusion-arithmetic", 1, fusion_arithmetic);
  criterion("toy-training", 300, toy_training);
  criterion("rt60-recovery", 10, rt60_recovery);
  criterion("mcd-sanity", 10, mcd_sanity);
  criterion("topk-sweep", 30, [&] { return sweep_structure(work); });
  criterion("determinism", 30, [&] { return determinism(work); });
  fs::remove_all(work);
  std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
