#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <string>

#include "m2se/error.hpp"
#include "m2se/feature_io.hpp"
#include "m2se/rng.hpp"
#include "oracles.hpp"

using namespace m2se;

namespace {

FeatureBundle zero_bundle(std::size_t m, std::size_t d) {
  FeatureBundle b;
  b.sample_id = "zeros";
  b.m = m;
  b.d = d;
  b.rgb_patch.assign(m * d, 0.0f);
  b.depth_patch.assign(m * d, 0.0f);
  b.rgb_global.assign(d, 0.0f);
  b.depth_global.assign(d, 0.0f);
  b.caption_sem.assign(d, 0.0f);
  return b;
}

FeatureBundle random_bundle(std::size_t m, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  FeatureBundle b = zero_bundle(m, d);
  b.sample_id = "random-" + std::to_string(seed);
  b.caption_text = "a hall with stone walls";
  for (auto* v : {&b.rgb_patch, &b.depth_patch, &b.rgb_global, &b.depth_global, &b.caption_sem}) {
    for (float& x : *v) x = static_cast<float>(rng.uniform(-100.0, 100.0));
  }
  return b;
}

// Little-endian byte builder, written against the documented layout only.
struct Bytes {
  std::string s;
  void raw(const std::string& t) { s += t; }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u8(std::uint8_t v) { s.push_back(static_cast<char>(v)); }
  void str(const std::string& t) {
    u32(static_cast<std::uint32_t>(t.size()));
    s += t;
  }
  void f32(float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  }
};

ErrorCode load_error(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    load_bundle(in);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "stream loaded without error";
  return ErrorCode::kInternal;
}

std::string serialize(const FeatureBundle& b) {
  std::ostringstream out;
  save_bundle(b, out);
  return out.str();
}

}  // namespace

TEST(FeatureIo, ZeroBundleByteCountAndRoundTrip) {
  const FeatureBundle b = zero_bundle(2, 3);
  std::ostringstream out;
  const std::uint64_t n = save_bundle(b, out);
  // header (magic, version, m, d) + sample_id + caption flag + payload
  const std::uint64_t header = 4 + 4 + 4 + 4;
  const std::uint64_t strings = 4 + b.sample_id.size() + 1;
  const std::uint64_t payload = 2 * (2 * 3 + 3) * 4 + 3 * 4;
  EXPECT_EQ(n, header + strings + payload);
  EXPECT_EQ(out.str().size(), n);
  std::istringstream in(out.str());
  EXPECT_EQ(load_bundle(in), b);
}

TEST(FeatureIo, FullSizeRoundTripIsBitExact) {
  const FeatureBundle b = random_bundle(256, 768, 42);
  std::istringstream in(serialize(b));
  const FeatureBundle back = load_bundle(in);
  EXPECT_EQ(back, b);
  EXPECT_EQ(std::memcmp(back.rgb_patch.data(), b.rgb_patch.data(), b.rgb_patch.size() * 4), 0);
}

TEST(FeatureIo, PropertyRoundTripRandomShapes) {
  Rng shapes(1);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t m = 1 + shapes.below(20);
    const std::size_t d = 1 + shapes.below(20);
    FeatureBundle b = random_bundle(m, d, seed);
    if (seed % 2) b.caption_text.reset();
    // Include subnormals and signed zero, which must survive bit-exactly.
    b.rgb_global[0] = std::numeric_limits<float>::denorm_min();
    b.depth_global[0] = -0.0f;
    std::istringstream in(serialize(b));
    const FeatureBundle back = load_bundle(in);
    EXPECT_EQ(back, b);
    EXPECT_TRUE(std::signbit(back.depth_global[0]));
  }
}

TEST(FeatureIo, HandBuiltStreamLoads) {
  // A bundle produced by a foreign writer following only the layout spec.
  Bytes w;
  w.raw("M2FB");
  w.u32(1);
  w.u32(2);  // m
  w.u32(2);  // d
  w.str("room-001");
  w.u8(1);
  w.str("a small tiled bathroom");
  const float rgb_patch[4] = {1.0f, 2.0f, 3.0f, 4.0f};
  const float rgb_global[2] = {5.0f, 6.0f};
  const float depth_patch[4] = {-1.0f, -2.0f, -3.0f, -4.0f};
  const float depth_global[2] = {0.5f, 0.25f};
  const float caption[2] = {0.125f, -8.0f};
  for (float f : rgb_patch) w.f32(f);
  for (float f : rgb_global) w.f32(f);
  for (float f : depth_patch) w.f32(f);
  for (float f : depth_global) w.f32(f);
  for (float f : caption) w.f32(f);

  std::istringstream in(w.s);
  const FeatureBundle b = load_bundle(in);
  EXPECT_EQ(b.sample_id, "room-001");
  ASSERT_TRUE(b.caption_text.has_value());
  EXPECT_EQ(*b.caption_text, "a small tiled bathroom");
  EXPECT_EQ(b.m, 2u);
  EXPECT_EQ(b.d, 2u);
  EXPECT_EQ(b.rgb_patch, std::vector<float>(rgb_patch, rgb_patch + 4));
  EXPECT_EQ(b.depth_patch, std::vector<float>(depth_patch, depth_patch + 4));
  EXPECT_EQ(b.rgb_global, std::vector<float>(rgb_global, rgb_global + 2));
  EXPECT_EQ(b.depth_global, std::vector<float>(depth_global, depth_global + 2));
  EXPECT_EQ(b.caption_sem, std::vector<float>(caption, caption + 2));

  // And our writer reproduces the foreign bytes exactly.
  EXPECT_EQ(serialize(b), w.s);
}

TEST(FeatureIo, NanRejectedBeforeWriting) {
  FeatureBundle b = zero_bundle(2, 3);
  b.depth_patch[4] = std::numeric_limits<float>::quiet_NaN();
  std::ostringstream out;
  try {
    save_bundle(b, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
  EXPECT_TRUE(out.str().empty());
}

TEST(FeatureIo, BadMagic) {
  std::string s = serialize(zero_bundle(2, 3));
  s[0] = 'X';
  EXPECT_EQ(load_error(s), ErrorCode::kBadMagic);
  EXPECT_EQ(load_error("M2"), ErrorCode::kBadMagic);
}

TEST(FeatureIo, VersionMismatch) {
  std::string s = serialize(zero_bundle(2, 3));
  s[4] = 2;
  EXPECT_EQ(load_error(s), ErrorCode::kVersionMismatch);
}

TEST(FeatureIo, TruncatedAfterHeader) {
  const std::string s = serialize(zero_bundle(2, 3));
  EXPECT_EQ(load_error(s.substr(0, 16)), ErrorCode::kTruncated);
  EXPECT_EQ(load_error(s.substr(0, s.size() - 1)), ErrorCode::kTruncated);
}

TEST(FeatureIo, NonFiniteInStream) {
  FeatureBundle b = zero_bundle(2, 3);
  std::string s = serialize(b);
  // Overwrite the last float (caption_sem[2]) with +inf.
  const float inf = std::numeric_limits<float>::infinity();
  std::memcpy(s.data() + s.size() - 4, &inf, 4);
  EXPECT_EQ(load_error(s), ErrorCode::kNonFinite);
}

TEST(FeatureIo, DimensionMismatches) {
  std::string zero_m = serialize(zero_bundle(2, 3));
  std::memset(zero_m.data() + 8, 0, 4);
  EXPECT_EQ(load_error(zero_m), ErrorCode::kDimensionMismatch);

  std::string trailing = serialize(zero_bundle(2, 3)) + std::string(4, '\0');
  EXPECT_EQ(load_error(trailing), ErrorCode::kDimensionMismatch);

  std::string flag = serialize(zero_bundle(2, 3));
  flag[16 + 4 + 5] = 7;  // caption flag after "zeros"
  EXPECT_EQ(load_error(flag), ErrorCode::kDimensionMismatch);

  FeatureBundle short_global = zero_bundle(2, 3);
  short_global.rgb_global.pop_back();
  EXPECT_THROW(validate(short_global), Error);
}

TEST(FeatureIo, FileRoundTripAndMissingFile) {
  const auto dir = oracle::scratch_dir("fio");
  const FeatureBundle b = random_bundle(4, 5, 9);
  save_bundle_file(b, dir / "b.m2fb");
  EXPECT_EQ(load_bundle_file(dir / "b.m2fb"), b);
  try {
    load_bundle_file(dir / "missing.m2fb");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
  std::filesystem::remove_all(dir);
}

TEST(Synthetic, DeterministicAndSeedSensitive) {
  EXPECT_EQ(gen_synthetic_bundle(7, 8, 4, Scenario::kUniform),
            gen_synthetic_bundle(7, 8, 4, Scenario::kUniform));
  EXPECT_NE(gen_synthetic_bundle(1, 8, 4, Scenario::kUniform).rgb_patch,
            gen_synthetic_bundle(2, 8, 4, Scenario::kUniform).rgb_patch);
  for (Scenario s : {Scenario::kUniform, Scenario::kClustered, Scenario::kPlanted}) {
    const FeatureBundle b = gen_synthetic_bundle(3, 16, 5, s);
    EXPECT_NO_THROW(validate(b));
    EXPECT_EQ(b, gen_synthetic_bundle(3, 16, 5, s));
  }
}

TEST(Synthetic, PlantedSetRecoverableByCosineRanking) {
  const SyntheticFixture fx = gen_synthetic_fixture(1, 256, 768, Scenario::kPlanted);
  const FeatureBundle& b = fx.bundle;
  ASSERT_EQ(fx.planted.size(), planted_count(256));
  std::vector<double> sims(b.m);
  for (std::size_t i = 0; i < b.m; ++i) {
    sims[i] = oracle::cosine(b.rgb_patch.data() + i * b.d, b.caption_sem.data(), b.d);
  }
  std::vector<std::size_t> top = oracle::topk_by_sort(sims, fx.planted.size());
  std::sort(top.begin(), top.end());
  EXPECT_EQ(top, fx.planted);
}

TEST(Synthetic, RejectsEmptyShapes) {
  EXPECT_THROW(gen_synthetic_bundle(0, 0, 4, Scenario::kUniform), Error);
  EXPECT_THROW(gen_synthetic_bundle(0, 4, 0, Scenario::kPlanted), Error);
}

TEST(Synthetic, ScenarioNames) {
  for (Scenario s : {Scenario::kUniform, Scenario::kClustered, Scenario::kPlanted}) {
    EXPECT_EQ(parse_scenario(scenario_name(s)), s);
  }
  EXPECT_FALSE(parse_scenario("other").has_value());
}
