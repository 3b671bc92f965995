#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "m2se/attention.hpp"
#include "m2se/matrix.hpp"

namespace m2se {

// Semantic-guided patch attention: caption query over patch context.
struct DetectorParams {
  LinearParams caption_in;  // d -> d_model
  LinearParams patch_in;    // d -> d_model
  MhaParams attn;
};

void append_tensors(std::vector<NamedTensor>& out, const std::string& prefix,
                    DetectorParams& p);

struct TopkSelection {
  Matrix features;                   // k x d_model, row i is patch indices[i]
  std::vector<std::size_t> indices;  // distinct, in [0, m)
  std::vector<double> weights;       // non-increasing; empty for a bare gather
};

// Projects the caption (1 x d) and patches (m x d) to d_model and attends with
// the caption as the single query. avg_weights is 1 x m.
AttentionOutput semantic_patch_attention(const Matrix& caption_sem, const Matrix& patches,
                                         const DetectorParams& p);
AttentionOutput semantic_patch_attention(const Matrix& caption_sem, const Matrix& patches,
                                         const DetectorParams& p, Matrix& patch_proj);

// Indices of the k largest weights ordered by (weight desc, index asc).
std::vector<std::size_t> select_topk_indices(std::span<const double> weights, std::size_t k);

// Top-k detector over row 0 of attended.avg_weights; features are gathered
// from the projected patch matrix.
TopkSelection phi_lsu_topk(const AttentionOutput& attended, const Matrix& patch_proj,
                           std::size_t k);

// Index-shared depth selector: row i of the result is depth_patch_proj row
// omega[i]. `weights`, when given, is carried through unchanged.
TopkSelection psi_lsu_select(const Matrix& depth_patch_proj, std::span<const std::size_t> omega,
                             std::span<const double> weights = {});

// Unshared variant: the depth stream ranks its own patches from its own
// caption-guided attention.
TopkSelection topk_unshared(const AttentionOutput& depth_attended, const Matrix& depth_patch_proj,
                            std::size_t k);

}  // namespace m2se
