#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "m2se/attention.hpp"
#include "m2se/feature_io.hpp"
#include "m2se/local_spatial.hpp"
#include "m2se/matrix.hpp"

namespace m2se {

inline constexpr std::size_t kDefaultModelDim = 512;
inline constexpr std::size_t kDefaultDetectorHeads = 2;
inline constexpr std::size_t kDefaultOtherHeads = 4;
inline constexpr std::size_t kDefaultTopk = 140;
inline constexpr double kDefaultLambda = 0.5;

// Local-aware attention: selected local rows query the projected global vector.
struct LocalAwareParams {
  LinearParams global_in;  // d -> d_model
  MhaParams attn;
};

// Semantic-guided attention: projected caption queries the local-aware rows.
struct SemanticParams {
  LinearParams caption_in;  // d -> d_model
  MhaParams attn;
};

struct PipelineConfig {
  std::size_t d_in = kDefaultFeatureDim;
  std::size_t d_model = kDefaultModelDim;
  std::size_t heads_detector = kDefaultDetectorHeads;
  std::size_t heads_other = kDefaultOtherHeads;
};

struct PipelineParams {
  PipelineConfig config;
  DetectorParams rgb_detector;
  // Only patch_in is used in shared mode; the attention runs in unshared mode.
  DetectorParams depth_detector;
  LocalAwareParams local_rgb;
  LocalAwareParams local_depth;
  SemanticParams semantic_rgb;
  SemanticParams semantic_depth;
  double lambda1 = kDefaultLambda;
  double lambda2 = kDefaultLambda;

  static PipelineParams xavier(const PipelineConfig& config, std::uint64_t seed);
  // Identity projections and attention; requires d_in == d_model.
  static PipelineParams identity(const PipelineConfig& config);
  static PipelineParams zeros_like(const PipelineParams& p);
};

void validate(const PipelineParams& p);

// Every trainable tensor with its hierarchical name; lambdas are excluded.
std::vector<NamedTensor> named_tensors(PipelineParams& p);

enum class TopkMode { kShared, kUnshared };

const char* mode_name(TopkMode mode);
std::optional<TopkMode> parse_mode(const std::string& name);

// Raw bundle features as doubles: patches m x d, the rest 1 x d.
struct BundleTensors {
  std::string sample_id;
  Matrix rgb_patch;
  Matrix rgb_global;
  Matrix depth_patch;
  Matrix depth_global;
  Matrix caption_sem;

  static BundleTensors from_bundle(const FeatureBundle& b);
};

// k query rows attend over the projected global vector (a single context row);
// the attended global context is added back onto the selected rows.
Matrix local_aware_attention(const Matrix& selected, const Matrix& global_vec,
                             const LocalAwareParams& p, AttentionOutput* details = nullptr);

// The projected caption attends over the k local-aware rows; returns 1 x d_model.
Matrix semantic_guided_attention(const Matrix& caption_sem, const Matrix& local_aware,
                                 const SemanticParams& p, AttentionOutput* details = nullptr);

Matrix fuse_hv(const Matrix& h_g_r, const Matrix& h_g_d, double lambda1, double lambda2);

struct EnvironmentEmbedding {
  std::vector<double> h_v;
  std::size_t k = 0;
  TopkMode mode = TopkMode::kShared;
  std::string sample_id;
};

struct PipelineTrace {
  std::vector<double> a_p_r;               // RGB detector weights, length m
  std::vector<double> a_p_d;               // depth detector weights (unshared only)
  std::vector<std::size_t> omega;          // RGB selection
  std::vector<std::size_t> omega_depth;    // indices the depth gather used
  std::vector<double> rgb_selected_weights;
  std::vector<double> depth_selected_weights;
  Matrix rgb_patch_proj;                   // m x d_model
  Matrix depth_patch_proj;                 // m x d_model
  Matrix f_hat_p_r;                        // 1 x d_model, detector output
  Matrix h_topk_r, h_topk_d;               // k x d_model
  Matrix h_l_r, h_l_d;                     // k x d_model
  Matrix h_g_r, h_g_d;                     // 1 x d_model
  // Head-averaged attention weights of each stage, in execution order.
  std::vector<std::pair<std::string, Matrix>> stage_weights;
};

// Forward state with the caches needed by pipeline_backward.
struct PipelineState {
  PipelineTrace trace;
  Matrix h_v;  // 1 x d_model
  std::size_t k = 0;
  TopkMode mode = TopkMode::kShared;
  MhaCache local_rgb, local_depth, semantic_rgb, semantic_depth;
};

PipelineState pipeline_forward(const BundleTensors& x, const PipelineParams& p, std::size_t k,
                               TopkMode mode);

// Accumulates d(loss)/d(params) given d(loss)/d(h_v). Top-k selection is
// piecewise constant, so the detector attention receives no gradient.
void pipeline_backward(const BundleTensors& x, const PipelineState& state,
                       const PipelineParams& p, const Matrix& d_hv, PipelineParams& grad);

std::pair<EnvironmentEmbedding, PipelineTrace> compute_environment_embedding(
    const FeatureBundle& bundle, const PipelineParams& p, std::size_t k, TopkMode mode);

}  // namespace m2se
