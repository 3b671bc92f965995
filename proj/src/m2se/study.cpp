#include "m2se/study.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "m2se/error.hpp"

namespace m2se {

namespace {

double mass(const std::vector<double>& w) { return std::accumulate(w.begin(), w.end(), 0.0); }

}  // namespace

std::vector<SweepRow> topk_sweep(std::span<const FeatureBundle> bundles, const PipelineParams& p,
                                 std::span<const std::size_t> ks) {
  require(!bundles.empty(), ErrorCode::kInvalidArgument, "sweep needs at least one bundle");
  require(!ks.empty(), ErrorCode::kInvalidArgument, "sweep needs at least one k");
  validate(p);
  std::vector<std::size_t> grid(ks.begin(), ks.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const std::size_t k_ref = grid.back();
  for (const FeatureBundle& b : bundles) {
    require(grid.front() >= 1 && k_ref <= b.m, ErrorCode::kInvalidArgument,
            "k values must lie in [1, m] for bundle " + b.sample_id);
  }

  std::vector<BundleTensors> inputs;
  inputs.reserve(bundles.size());
  for (const FeatureBundle& b : bundles) inputs.push_back(BundleTensors::from_bundle(b));

  std::vector<SweepRow> rows;
  for (const TopkMode mode : {TopkMode::kShared, TopkMode::kUnshared}) {
    std::vector<Matrix> reference;
    reference.reserve(inputs.size());
    for (const BundleTensors& x : inputs) reference.push_back(pipeline_forward(x, p, k_ref, mode).h_v);

    for (std::size_t k : grid) {
      SweepRow row;
      row.k = k;
      row.mode = mode;
      row.bundles = inputs.size();
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const PipelineState s = pipeline_forward(inputs[i], p, k, mode);
        row.mean_hv_distance += std::sqrt(squared_norm(s.h_v - reference[i]));
        const double rgb = mass(s.trace.rgb_selected_weights);
        row.mean_selected_mass +=
            mode == TopkMode::kShared ? rgb : 0.5 * (rgb + mass(s.trace.depth_selected_weights));
      }
      row.mean_hv_distance /= static_cast<double>(inputs.size());
      row.mean_selected_mass /= static_cast<double>(inputs.size());
      rows.push_back(row);
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.k < b.k;
  });
  return rows;
}

std::vector<std::size_t> default_sweep_grid() {
  std::vector<std::size_t> ks;
  for (std::size_t k = 20; k <= 240; k += 20) ks.push_back(k);
  return ks;
}

}  // namespace m2se
