#include "m2se/feature_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "m2se/binary_io.hpp"
#include "m2se/error.hpp"
#include "m2se/rng.hpp"

namespace m2se {

namespace {

constexpr char kMagic[4] = {'M', '2', 'F', 'B'};
// Guards allocation on corrupt headers: 2^28 floats (1 GiB) per matrix.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 28;

void check_finite(const std::vector<float>& v, const char* name) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      fail(ErrorCode::kNonFinite,
           std::string(name) + "[" + std::to_string(i) + "] is not finite");
    }
  }
}

void check_size(const std::vector<float>& v, std::size_t expected, const char* name) {
  if (v.size() != expected) {
    fail(ErrorCode::kDimensionMismatch, std::string(name) + " has " +
                                            std::to_string(v.size()) + " entries, expected " +
                                            std::to_string(expected));
  }
}

}  // namespace

void validate(const FeatureBundle& b) {
  require(b.m >= 1 && b.d >= 1, ErrorCode::kDimensionMismatch,
          "bundle requires m >= 1 and d >= 1");
  check_size(b.rgb_patch, b.m * b.d, "rgb_patch");
  check_size(b.depth_patch, b.m * b.d, "depth_patch");
  check_size(b.rgb_global, b.d, "rgb_global");
  check_size(b.depth_global, b.d, "depth_global");
  check_size(b.caption_sem, b.d, "caption_sem");
  check_finite(b.rgb_patch, "rgb_patch");
  check_finite(b.rgb_global, "rgb_global");
  check_finite(b.depth_patch, "depth_patch");
  check_finite(b.depth_global, "depth_global");
  check_finite(b.caption_sem, "caption_sem");
}

std::uint64_t save_bundle(const FeatureBundle& b, std::ostream& out) {
  validate(b);
  binary::Writer w(out);
  w.bytes(kMagic, 4);
  w.u32(kBundleVersion);
  w.u32(static_cast<std::uint32_t>(b.m));
  w.u32(static_cast<std::uint32_t>(b.d));
  w.string(b.sample_id);
  w.u8(b.caption_text ? 1 : 0);
  if (b.caption_text) w.string(*b.caption_text);
  w.f32s(b.rgb_patch);
  w.f32s(b.rgb_global);
  w.f32s(b.depth_patch);
  w.f32s(b.depth_global);
  w.f32s(b.caption_sem);
  out.flush();
  if (!out) fail(ErrorCode::kIo, "flush failed");
  return w.count();
}

FeatureBundle load_bundle(std::istream& in) {
  binary::Reader r(in);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "stream does not start with M2FB");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kBundleVersion) {
    fail(ErrorCode::kVersionMismatch,
         "unsupported bundle version " + std::to_string(version));
  }
  FeatureBundle b;
  b.m = r.u32("m");
  b.d = r.u32("d");
  if (b.m == 0 || b.d == 0) {
    fail(ErrorCode::kDimensionMismatch, "header declares a zero dimension");
  }
  if (static_cast<std::uint64_t>(b.m) * b.d > kMaxElements) {
    fail(ErrorCode::kDimensionMismatch, "header dimensions exceed supported size");
  }
  b.sample_id = r.string("sample_id");
  const std::uint8_t flag = r.u8("caption flag");
  if (flag > 1) fail(ErrorCode::kDimensionMismatch, "caption flag must be 0 or 1");
  if (flag == 1) b.caption_text = r.string("caption");
  b.rgb_patch = r.f32s(b.m * b.d, "rgb_patch");
  b.rgb_global = r.f32s(b.d, "rgb_global");
  b.depth_patch = r.f32s(b.m * b.d, "depth_patch");
  b.depth_global = r.f32s(b.d, "depth_global");
  b.caption_sem = r.f32s(b.d, "caption_sem");
  if (!r.at_end()) {
    fail(ErrorCode::kDimensionMismatch, "payload is longer than the header dimensions imply");
  }
  validate(b);
  return b;
}

std::uint64_t save_bundle_file(const FeatureBundle& b, const std::filesystem::path& path) {
  validate(b);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  return save_bundle(b, out);
}

FeatureBundle load_bundle_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return load_bundle(in);
}

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kUniform: return "uniform";
    case Scenario::kClustered: return "clustered";
    case Scenario::kPlanted: return "planted";
  }
  return "unknown";
}

std::optional<Scenario> parse_scenario(const std::string& name) {
  if (name == "uniform") return Scenario::kUniform;
  if (name == "clustered") return Scenario::kClustered;
  if (name == "planted") return Scenario::kPlanted;
  return std::nullopt;
}

std::size_t planted_count(std::size_t m) { return std::max<std::size_t>(1, m / 8); }

SyntheticFixture gen_synthetic_fixture(std::uint64_t seed, std::size_t m, std::size_t d,
                                       Scenario scenario) {
  require(m >= 1 && d >= 1, ErrorCode::kInvalidArgument, "m and d must be >= 1");
  Rng rng(seed);
  SyntheticFixture fx;
  FeatureBundle& b = fx.bundle;
  b.sample_id = std::string("synthetic-") + scenario_name(scenario) + "-" + std::to_string(seed);
  b.caption_text = std::string("synthetic ") + scenario_name(scenario) + " scene";
  b.m = m;
  b.d = d;

  auto normals = [&](std::size_t n) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(rng.normal());
    return v;
  };

  b.caption_sem = normals(d);
  b.rgb_global = normals(d);
  b.depth_global = normals(d);

  switch (scenario) {
    case Scenario::kUniform: {
      b.rgb_patch = normals(m * d);
      b.depth_patch = normals(m * d);
      break;
    }
    case Scenario::kClustered: {
      const std::size_t centres = std::clamp<std::size_t>(m / 32, 2, 8);
      auto clustered = [&] {
        std::vector<float> c = normals(centres * d);
        std::vector<float> out(m * d);
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t k = rng.below(centres);
          for (std::size_t j = 0; j < d; ++j)
            out[i * d + j] = static_cast<float>(0.9 * c[k * d + j] + 0.3 * rng.normal());
        }
        return out;
      };
      b.rgb_patch = clustered();
      b.depth_patch = clustered();
      for (std::size_t j = 0; j < d; ++j)
        b.caption_sem[j] = static_cast<float>(0.5 * b.caption_sem[j] + 0.5 * b.rgb_patch[j]);
      break;
    }
    case Scenario::kPlanted: {
      std::vector<std::size_t> order(m);
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = m; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      fx.planted.assign(order.begin(), order.begin() + planted_count(m));
      std::sort(fx.planted.begin(), fx.planted.end());

      b.rgb_patch = normals(m * d);
      for (std::size_t i : fx.planted) {
        for (std::size_t j = 0; j < d; ++j) {
          b.rgb_patch[i * d + j] =
              static_cast<float>(0.6 * b.caption_sem[j] + 0.8 * b.rgb_patch[i * d + j]);
        }
      }
      b.depth_patch = normals(m * d);
      break;
    }
  }
  return fx;
}

FeatureBundle gen_synthetic_bundle(std::uint64_t seed, std::size_t m, std::size_t d,
                                   Scenario scenario) {
  return gen_synthetic_fixture(seed, m, d, scenario).bundle;
}

}  // namespace m2se
