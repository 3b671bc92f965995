#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace m2se {

inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::size_t kDefaultPatchCount = 256;
inline constexpr std::size_t kDefaultFeatureDim = 768;

// One sample's pre-extracted visual and semantic features. Matrices are
// row-major float32, m x d.
struct FeatureBundle {
  std::string sample_id;
  std::size_t m = 0;
  std::size_t d = 0;
  std::vector<float> rgb_patch;
  std::vector<float> rgb_global;
  std::vector<float> depth_patch;
  std::vector<float> depth_global;
  std::vector<float> caption_sem;
  std::optional<std::string> caption_text;

  friend bool operator==(const FeatureBundle&, const FeatureBundle&) = default;
};

// Throws Error(kDimensionMismatch / kNonFinite) when an invariant is broken.
void validate(const FeatureBundle& bundle);

std::uint64_t save_bundle(const FeatureBundle& bundle, std::ostream& out);
FeatureBundle load_bundle(std::istream& in);

std::uint64_t save_bundle_file(const FeatureBundle& bundle, const std::filesystem::path& path);
FeatureBundle load_bundle_file(const std::filesystem::path& path);

enum class Scenario { kUniform, kClustered, kPlanted };

const char* scenario_name(Scenario s);
std::optional<Scenario> parse_scenario(const std::string& name);

// Number of planted patches for the planted scenario.
std::size_t planted_count(std::size_t m);

struct SyntheticFixture {
  FeatureBundle bundle;
  // Sorted ascending; empty unless the scenario is planted.
  std::vector<std::size_t> planted;
};

// Deterministic in (seed, m, d, scenario).
//   uniform   - every entry standard normal, no structure.
//   clustered - patches scattered around a handful of centres; the caption
//               sits near one centre.
//   planted   - planted_count(m) RGB patches are 0.6 * caption + 0.8 * noise,
//               all others (and all of depth) are unstructured noise.
SyntheticFixture gen_synthetic_fixture(std::uint64_t seed, std::size_t m, std::size_t d,
                                       Scenario scenario);
FeatureBundle gen_synthetic_bundle(std::uint64_t seed, std::size_t m, std::size_t d,
                                   Scenario scenario);

}  // namespace m2se
