#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "m2se/feature_io.hpp"
#include "m2se/global_fusion.hpp"

namespace m2se {

// Comparative harness for shared vs unshared Top-k selection.
struct SweepRow {
  std::size_t k = 0;
  TopkMode mode = TopkMode::kShared;
  // Mean over bundles of ||h_v(k) - h_v(k_max)|| within the same mode.
  double mean_hv_distance = 0.0;
  // Mean over bundles of the attention mass captured by the selection; in
  // unshared mode the RGB and depth masses are averaged.
  double mean_selected_mass = 0.0;
  std::size_t bundles = 0;
};

// Rows are ordered by k ascending, shared before unshared.
std::vector<SweepRow> topk_sweep(std::span<const FeatureBundle> bundles, const PipelineParams& p,
                                 std::span<const std::size_t> ks);

// 20, 40, ..., 240
std::vector<std::size_t> default_sweep_grid();

}  // namespace m2se
