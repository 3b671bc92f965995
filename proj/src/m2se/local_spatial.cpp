#include "m2se/local_spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "m2se/error.hpp"

namespace m2se {

void append_tensors(std::vector<NamedTensor>& out, const std::string& prefix,
                    DetectorParams& p) {
  append_tensors(out, prefix + ".caption_in", p.caption_in);
  append_tensors(out, prefix + ".patch_in", p.patch_in);
  append_tensors(out, prefix + ".attn", p.attn);
}

AttentionOutput semantic_patch_attention(const Matrix& caption_sem, const Matrix& patches,
                                         const DetectorParams& p, Matrix& patch_proj) {
  require(caption_sem.rows() == 1, ErrorCode::kDimensionMismatch,
          "caption feature must be a single row");
  require(caption_sem.cols() == patches.cols(), ErrorCode::kDimensionMismatch,
          "caption and patch features differ in raw dimension");
  const Matrix query = linear_forward(caption_sem, p.caption_in);
  patch_proj = linear_forward(patches, p.patch_in);
  return mha_forward(query, patch_proj, p.attn);
}

AttentionOutput semantic_patch_attention(const Matrix& caption_sem, const Matrix& patches,
                                         const DetectorParams& p) {
  Matrix unused;
  return semantic_patch_attention(caption_sem, patches, p, unused);
}

std::vector<std::size_t> select_topk_indices(std::span<const double> weights, std::size_t k) {
  require(k >= 1 && k <= weights.size(), ErrorCode::kInvalidArgument,
          "k = " + std::to_string(k) + " outside [1, " + std::to_string(weights.size()) + "]");
  for (double w : weights) {
    require(std::isfinite(w), ErrorCode::kNonFinite, "selection weights must be finite");
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto before = [&](std::size_t a, std::size_t b) {
    return weights[a] > weights[b] || (weights[a] == weights[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    before);
  order.resize(k);
  return order;
}

TopkSelection phi_lsu_topk(const AttentionOutput& attended, const Matrix& patch_proj,
                           std::size_t k) {
  require(attended.avg_weights.rows() >= 1, ErrorCode::kDimensionMismatch,
          "attention weights are empty");
  require(attended.avg_weights.cols() == patch_proj.rows(), ErrorCode::kDimensionMismatch,
          "attention weights and patch matrix disagree on m");
  const auto w = attended.avg_weights.row(0);
  TopkSelection sel;
  sel.indices = select_topk_indices(w, k);
  sel.weights.reserve(k);
  for (std::size_t i : sel.indices) sel.weights.push_back(w[i]);
  sel.features = gather_rows(patch_proj, sel.indices);
  return sel;
}

TopkSelection psi_lsu_select(const Matrix& depth_patch_proj, std::span<const std::size_t> omega,
                             std::span<const double> weights) {
  require(!omega.empty(), ErrorCode::kInvalidArgument, "index set is empty");
  require(weights.empty() || weights.size() == omega.size(), ErrorCode::kDimensionMismatch,
          "weights and indices differ in length");
  std::vector<bool> seen(depth_patch_proj.rows(), false);
  for (std::size_t i : omega) {
    require(i < depth_patch_proj.rows(), ErrorCode::kInvalidArgument,
            "index " + std::to_string(i) + " out of range");
    require(!seen[i], ErrorCode::kInvalidArgument, "duplicate index " + std::to_string(i));
    seen[i] = true;
  }
  TopkSelection sel;
  sel.indices.assign(omega.begin(), omega.end());
  sel.weights.assign(weights.begin(), weights.end());
  sel.features = gather_rows(depth_patch_proj, omega);
  return sel;
}

TopkSelection topk_unshared(const AttentionOutput& depth_attended, const Matrix& depth_patch_proj,
                            std::size_t k) {
  return phi_lsu_topk(depth_attended, depth_patch_proj, k);
}

}  // namespace m2se
