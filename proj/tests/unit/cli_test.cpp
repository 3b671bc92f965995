#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "m2se/m2se.h"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = oracle::scratch_dir("cli"); }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult run(const std::string& args) {
    const std::string cmd = std::string("\"") + M2SE_CLI_PATH + "\" " + args + " >\"" +
                            (dir_ / "stdout").string() + "\" 2>\"" + (dir_ / "stderr").string() +
                            "\"";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir_ / "stdout");
    r.err = slurp(dir_ / "stderr");
    return r;
  }

  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  void fixtures(const std::string& sub, int count, const std::string& shape = "--m 16 --d 8") {
    ASSERT_EQ(run("gen-fixtures --count " + std::to_string(count) + " " + shape + " -o " + path(sub)).code, 0);
  }

  void write_wav(const fs::path& p, double t60, std::uint64_t seed) {
    const std::vector<float> s = oracle::decaying_noise(t60, 1.5, 16000, seed);
    m2se_waveform* w = nullptr;
    ASSERT_EQ(m2se_waveform_create(s.data(), s.size(), 16000, &w), M2SE_OK);
    fs::create_directories(p.parent_path());
    ASSERT_EQ(m2se_wav_write(w, p.c_str(), M2SE_WAV_PCM16), M2SE_OK);
    m2se_waveform_free(w);
  }

  fs::path dir_;
};

const std::string kSmall = "--topk 4 --d-model 8 ";

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("fuse").code, 2);
  EXPECT_EQ(run("--mode sideways fuse x -o y").code, 2);
  EXPECT_EQ(run("--d-model 6 --heads-other 4 fuse x -o y").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, FuseWritesOutputsAndIsDeterministic) {
  fixtures("fx", 3);
  const std::string in = path("fx") + "/*.m2fb";
  ASSERT_EQ(run(kSmall + "fuse " + in + " -o " + path("a")).code, 0);
  ASSERT_EQ(run(kSmall + "fuse " + in + " -o " + path("b")).code, 0);
  const std::string summary = slurp(path("a/summary.csv"));
  EXPECT_EQ(summary.rfind("sample_id,file,mode,k,rgb_mass,depth_mass,rgb_indices\n", 0), 0u);
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 4);
  EXPECT_EQ(summary, slurp(path("b/summary.csv")));
  EXPECT_EQ(slurp(path("a/hv.csv")), slurp(path("b/hv.csv")));
  int f32 = 0;
  for (const auto& e : fs::directory_iterator(path("a"))) {
    if (e.path().extension() != ".f32") continue;
    ++f32;
    EXPECT_EQ(fs::file_size(e.path()), 8u * 4u);
    EXPECT_EQ(slurp(e.path()), slurp(fs::path(path("b")) / e.path().filename()));
  }
  EXPECT_EQ(f32, 3);
}

TEST_F(Cli, FuseReportsCorruptBundleButKeepsOthers) {
  fixtures("fx", 3);
  std::ofstream(path("fx/zz-corrupt.m2fb"), std::ios::binary) << "M2FBgarbage";
  const CliResult r = run(kSmall + "fuse " + path("fx") + "/*.m2fb -o " + path("out"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("zz-corrupt"), std::string::npos) << r.err;
  const std::string summary = slurp(path("out/summary.csv"));
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 4);
}

TEST_F(Cli, ModesChangeSummary) {
  fixtures("fx", 2);
  ASSERT_EQ(run(kSmall + "--mode shared fuse " + path("fx") + "/*.m2fb -o " + path("s")).code, 0);
  ASSERT_EQ(run(kSmall + "--mode unshared fuse " + path("fx") + "/*.m2fb -o " + path("u")).code, 0);
  EXPECT_NE(slurp(path("s/hv.csv")), slurp(path("u/hv.csv")));
  EXPECT_NE(slurp(path("u/summary.csv")).find(",unshared,"), std::string::npos);
}

TEST_F(Cli, ConfigFileSetsGlobalOptions) {
  fixtures("fx", 1);
  std::ofstream(path("run.ini")) << "topk=5\nmode=unshared\nd-model=8\n";
  ASSERT_EQ(run("--config " + path("run.ini") + " fuse " + path("fx") + "/*.m2fb -o " + path("c")).code, 0);
  const std::string summary = slurp(path("c/summary.csv"));
  EXPECT_NE(summary.find(",unshared,5,"), std::string::npos) << summary;
  std::ofstream(path("bad.ini")) << "no_such_key=1\n";
  EXPECT_EQ(run("--config " + path("bad.ini") + " fuse x -o y").code, 2);
}

TEST_F(Cli, GenFixturesIsStableAcrossRuns) {
  fixtures("one", 2);
  fixtures("two", 2);
  int n = 0;
  for (const auto& e : fs::directory_iterator(path("one"))) {
    ++n;
    EXPECT_EQ(slurp(e.path()), slurp(fs::path(path("two")) / e.path().filename()));
  }
  EXPECT_EQ(n, 2);
  const CliResult r = run("inspect " + path("one") + "/*.m2fb");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("m 16, d 8"), std::string::npos) << r.out;
}

TEST_F(Cli, TopkSweepCsv) {
  fixtures("fx", 2);
  const CliResult r = run(kSmall + "topk-sweep " + path("fx") + " --k-list 2,4,16");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("k,mode,mean_hv_distance,mean_selected_mass,bundles\n", 0), 0u);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 7);
  EXPECT_EQ(run(kSmall + "topk-sweep " + path("fx") + " --k-list 2,40").code, 1);
}

TEST_F(Cli, EvalIdenticalDirectoriesAndUnpaired) {
  write_wav(path("ref/a.wav"), 0.4, 1);
  write_wav(path("ref/b.wav"), 0.6, 2);
  write_wav(path("ref/only-ref.wav"), 0.6, 3);
  fs::create_directories(path("syn"));
  fs::copy_file(path("ref/a.wav"), path("syn/a.wav"));
  fs::copy_file(path("ref/b.wav"), path("syn/b.wav"));
  const CliResult r = run("eval " + path("ref") + " " + path("syn"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("sample_id,rt60_ref,rt60_syn,rte,mcd\n", 0), 0u);
  EXPECT_NE(r.out.find("\nmean,,,0,0\n"), std::string::npos) << r.out;
  EXPECT_NE(r.err.find("only-ref"), std::string::npos) << r.err;

  const CliResult sub = run("eval " + path("ref") + " " + path("syn") + " --samples 1 -o " + path("e.csv"));
  ASSERT_EQ(sub.code, 0);
  const std::string csv = slurp(path("e.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST_F(Cli, TrainSynthAndMel) {
  fixtures("fx", 2, "--m 8 --d 6");  // the toy model's input shape
  const CliResult t = run("--seed 1 train-toy --steps 60 -o " + path("toy"));
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(path("toy/toy.m2ck")));
  const std::string losses = slurp(path("toy/losses.csv"));
  EXPECT_EQ(std::count(losses.begin(), losses.end(), '\n'), 61);

  const std::string synth = "synth-toy " + path("fx") + "/*.m2fb --checkpoint " + path("toy/toy.m2ck");
  ASSERT_EQ(run(synth + " --wav --iterations 4 -o " + path("s1")).code, 0);
  ASSERT_EQ(run(synth + " --wav --iterations 4 -o " + path("s2")).code, 0);
  int wavs = 0;
  for (const auto& e : fs::directory_iterator(path("s1"))) {
    EXPECT_EQ(slurp(e.path()), slurp(fs::path(path("s2")) / e.path().filename())) << e.path();
    wavs += e.path().extension() == ".wav";
  }
  EXPECT_EQ(wavs, 2);

  fs::path wav;
  for (const auto& e : fs::directory_iterator(path("s1")))
    if (e.path().extension() == ".wav") wav = e.path();
  ASSERT_EQ(run("mel " + wav.string() + " -o " + path("mel")).code, 0);
  const CliResult ins = run("inspect " + path("toy/toy.m2ck") + " " + wav.string());
  EXPECT_EQ(ins.code, 0);
  EXPECT_NE(ins.out.find("checkpoint"), std::string::npos);
  EXPECT_NE(ins.out.find("wav:"), std::string::npos);
}

TEST_F(Cli, MissingInputsAreRuntimeFailures) {
  EXPECT_EQ(run("inspect " + path("nothing.m2fb")).code, 1);
  EXPECT_EQ(run("synth-toy x.m2fb --checkpoint " + path("nope.m2ck") + " -o " + path("o")).code, 1);
  EXPECT_EQ(run("eval " + path("r") + " " + path("s")).code, 2);  // not directories
  fs::create_directories(path("r"));
  fs::create_directories(path("s"));
  EXPECT_EQ(run("eval " + path("r") + " " + path("s")).code, 1);  // no pairs
}
