#include "m2se/global_fusion.hpp"

#include <cmath>

#include "m2se/error.hpp"
#include "m2se/rng.hpp"

namespace m2se {

namespace {

void validate_config(const PipelineConfig& c) {
  require(c.d_in >= 1 && c.d_model >= 1, ErrorCode::kInvalidArgument,
          "pipeline dimensions must be positive");
  require(c.heads_detector >= 1 && c.d_model % c.heads_detector == 0,
          ErrorCode::kInvalidArgument, "detector heads must divide d_model");
  require(c.heads_other >= 1 && c.d_model % c.heads_other == 0, ErrorCode::kInvalidArgument,
          "attention heads must divide d_model");
}

void check_linear(const LinearParams& l, std::size_t d_in, std::size_t d_out, const char* name) {
  require(l.d_in() == d_in && l.d_out() == d_out && l.bias.rows() == 1 &&
              l.bias.cols() == d_out,
          ErrorCode::kDimensionMismatch, std::string(name) + " has the wrong shape");
}

}  // namespace

PipelineParams PipelineParams::xavier(const PipelineConfig& c, std::uint64_t seed) {
  validate_config(c);
  Rng rng(seed);
  PipelineParams p;
  p.config = c;
  auto detector = [&] {
    DetectorParams d;
    d.caption_in = LinearParams::xavier(c.d_in, c.d_model, rng);
    d.patch_in = LinearParams::xavier(c.d_in, c.d_model, rng);
    d.attn = MhaParams::xavier(c.d_model, c.heads_detector, rng);
    return d;
  };
  auto local = [&] {
    LocalAwareParams l;
    l.global_in = LinearParams::xavier(c.d_in, c.d_model, rng);
    l.attn = MhaParams::xavier(c.d_model, c.heads_other, rng);
    return l;
  };
  auto semantic = [&] {
    SemanticParams s;
    s.caption_in = LinearParams::xavier(c.d_in, c.d_model, rng);
    s.attn = MhaParams::xavier(c.d_model, c.heads_other, rng);
    return s;
  };
  p.rgb_detector = detector();
  p.depth_detector = detector();
  p.local_rgb = local();
  p.local_depth = local();
  p.semantic_rgb = semantic();
  p.semantic_depth = semantic();
  return p;
}

PipelineParams PipelineParams::identity(const PipelineConfig& c) {
  validate_config(c);
  require(c.d_in == c.d_model, ErrorCode::kInvalidArgument,
          "identity initialisation needs d_in == d_model");
  const std::size_t n = c.d_model;
  PipelineParams p;
  p.config = c;
  for (DetectorParams* d : {&p.rgb_detector, &p.depth_detector}) {
    d->caption_in = LinearParams::identity(n);
    d->patch_in = LinearParams::identity(n);
    d->attn = MhaParams::identity(n, c.heads_detector);
  }
  for (LocalAwareParams* l : {&p.local_rgb, &p.local_depth}) {
    l->global_in = LinearParams::identity(n);
    l->attn = MhaParams::identity(n, c.heads_other);
  }
  for (SemanticParams* s : {&p.semantic_rgb, &p.semantic_depth}) {
    s->caption_in = LinearParams::identity(n);
    s->attn = MhaParams::identity(n, c.heads_other);
  }
  return p;
}

PipelineParams PipelineParams::zeros_like(const PipelineParams& src) {
  PipelineParams p = src;
  for (NamedTensor& t : named_tensors(p)) t.tensor->fill(0.0);
  return p;
}

void validate(const PipelineParams& p) {
  const PipelineConfig& c = p.config;
  validate_config(c);
  for (const DetectorParams* d : {&p.rgb_detector, &p.depth_detector}) {
    check_linear(d->caption_in, c.d_in, c.d_model, "detector caption projection");
    check_linear(d->patch_in, c.d_in, c.d_model, "detector patch projection");
    validate(d->attn);
    require(d->attn.d_model() == c.d_model && d->attn.heads == c.heads_detector,
            ErrorCode::kDimensionMismatch, "detector attention shape");
  }
  for (const LocalAwareParams* l : {&p.local_rgb, &p.local_depth}) {
    check_linear(l->global_in, c.d_in, c.d_model, "global projection");
    validate(l->attn);
    require(l->attn.d_model() == c.d_model && l->attn.heads == c.heads_other,
            ErrorCode::kDimensionMismatch, "local-aware attention shape");
  }
  for (const SemanticParams* s : {&p.semantic_rgb, &p.semantic_depth}) {
    check_linear(s->caption_in, c.d_in, c.d_model, "caption projection");
    validate(s->attn);
    require(s->attn.d_model() == c.d_model && s->attn.heads == c.heads_other,
            ErrorCode::kDimensionMismatch, "semantic-guided attention shape");
  }
  require(std::isfinite(p.lambda1) && std::isfinite(p.lambda2), ErrorCode::kNonFinite,
          "fusion weights must be finite");
}

std::vector<NamedTensor> named_tensors(PipelineParams& p) {
  std::vector<NamedTensor> out;
  append_tensors(out, "rgb_detector", p.rgb_detector);
  append_tensors(out, "depth_detector", p.depth_detector);
  append_tensors(out, "local_rgb.global_in", p.local_rgb.global_in);
  append_tensors(out, "local_rgb.attn", p.local_rgb.attn);
  append_tensors(out, "local_depth.global_in", p.local_depth.global_in);
  append_tensors(out, "local_depth.attn", p.local_depth.attn);
  append_tensors(out, "semantic_rgb.caption_in", p.semantic_rgb.caption_in);
  append_tensors(out, "semantic_rgb.attn", p.semantic_rgb.attn);
  append_tensors(out, "semantic_depth.caption_in", p.semantic_depth.caption_in);
  append_tensors(out, "semantic_depth.attn", p.semantic_depth.attn);
  return out;
}

const char* mode_name(TopkMode mode) {
  return mode == TopkMode::kShared ? "shared" : "unshared";
}

std::optional<TopkMode> parse_mode(const std::string& name) {
  if (name == "shared") return TopkMode::kShared;
  if (name == "unshared") return TopkMode::kUnshared;
  return std::nullopt;
}

BundleTensors BundleTensors::from_bundle(const FeatureBundle& b) {
  validate(b);
  BundleTensors t;
  t.sample_id = b.sample_id;
  t.rgb_patch = Matrix::from_floats(b.m, b.d, b.rgb_patch);
  t.depth_patch = Matrix::from_floats(b.m, b.d, b.depth_patch);
  t.rgb_global = Matrix::from_floats(1, b.d, b.rgb_global);
  t.depth_global = Matrix::from_floats(1, b.d, b.depth_global);
  t.caption_sem = Matrix::from_floats(1, b.d, b.caption_sem);
  return t;
}

Matrix local_aware_attention(const Matrix& selected, const Matrix& global_vec,
                             const LocalAwareParams& p, AttentionOutput* details) {
  require(global_vec.rows() == 1, ErrorCode::kDimensionMismatch,
          "global feature must be a single row");
  const Matrix context = linear_forward(global_vec, p.global_in);
  AttentionOutput out = mha_forward(selected, context, p.attn);
  Matrix h = selected;
  h += out.updated;
  if (details) *details = std::move(out);
  return h;
}

Matrix semantic_guided_attention(const Matrix& caption_sem, const Matrix& local_aware,
                                 const SemanticParams& p, AttentionOutput* details) {
  require(caption_sem.rows() == 1, ErrorCode::kDimensionMismatch,
          "caption feature must be a single row");
  const Matrix query = linear_forward(caption_sem, p.caption_in);
  AttentionOutput out = mha_forward(query, local_aware, p.attn);
  Matrix h = out.updated;
  if (details) *details = std::move(out);
  return h;
}

Matrix fuse_hv(const Matrix& h_g_r, const Matrix& h_g_d, double lambda1, double lambda2) {
  require(h_g_r.same_shape(h_g_d), ErrorCode::kDimensionMismatch,
          "fused vectors differ in length");
  Matrix out(h_g_r.rows(), h_g_r.cols());
  auto a = h_g_r.values();
  auto b = h_g_d.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = lambda1 * a[i] + lambda2 * b[i];
  return out;
}

PipelineState pipeline_forward(const BundleTensors& x, const PipelineParams& p, std::size_t k,
                               TopkMode mode) {
  require(x.rgb_patch.cols() == p.config.d_in, ErrorCode::kDimensionMismatch,
          "bundle feature dimension " + std::to_string(x.rgb_patch.cols()) +
              " does not match parameters (" + std::to_string(p.config.d_in) + ")");
  const std::size_t m = x.rgb_patch.rows();
  require(k >= 1 && k <= m, ErrorCode::kInvalidArgument,
          "k = " + std::to_string(k) + " outside [1, " + std::to_string(m) + "]");

  PipelineState s;
  s.k = k;
  s.mode = mode;
  PipelineTrace& t = s.trace;

  const AttentionOutput rgb_att =
      semantic_patch_attention(x.caption_sem, x.rgb_patch, p.rgb_detector, t.rgb_patch_proj);
  t.a_p_r.assign(rgb_att.avg_weights.row(0).begin(), rgb_att.avg_weights.row(0).end());
  t.f_hat_p_r = rgb_att.updated;
  t.stage_weights.emplace_back("rgb_detector", rgb_att.avg_weights);
  TopkSelection rgb_sel = phi_lsu_topk(rgb_att, t.rgb_patch_proj, k);

  TopkSelection depth_sel;
  if (mode == TopkMode::kShared) {
    t.depth_patch_proj = linear_forward(x.depth_patch, p.depth_detector.patch_in);
    depth_sel = psi_lsu_select(t.depth_patch_proj, rgb_sel.indices, rgb_sel.weights);
  } else {
    const AttentionOutput depth_att = semantic_patch_attention(
        x.caption_sem, x.depth_patch, p.depth_detector, t.depth_patch_proj);
    t.a_p_d.assign(depth_att.avg_weights.row(0).begin(), depth_att.avg_weights.row(0).end());
    t.stage_weights.emplace_back("depth_detector", depth_att.avg_weights);
    depth_sel = topk_unshared(depth_att, t.depth_patch_proj, k);
  }

  t.omega = rgb_sel.indices;
  t.omega_depth = depth_sel.indices;
  t.rgb_selected_weights = rgb_sel.weights;
  t.depth_selected_weights = depth_sel.weights;
  t.h_topk_r = std::move(rgb_sel.features);
  t.h_topk_d = std::move(depth_sel.features);

  const Matrix g_r = linear_forward(x.rgb_global, p.local_rgb.global_in);
  AttentionOutput lr = mha_forward(t.h_topk_r, g_r, p.local_rgb.attn, &s.local_rgb);
  const Matrix g_d = linear_forward(x.depth_global, p.local_depth.global_in);
  AttentionOutput ld = mha_forward(t.h_topk_d, g_d, p.local_depth.attn, &s.local_depth);
  t.h_l_r = t.h_topk_r;
  t.h_l_r += lr.updated;
  t.h_l_d = t.h_topk_d;
  t.h_l_d += ld.updated;
  t.stage_weights.emplace_back("local_rgb", std::move(lr.avg_weights));
  t.stage_weights.emplace_back("local_depth", std::move(ld.avg_weights));

  const Matrix c_r = linear_forward(x.caption_sem, p.semantic_rgb.caption_in);
  AttentionOutput sr = mha_forward(c_r, t.h_l_r, p.semantic_rgb.attn, &s.semantic_rgb);
  const Matrix c_d = linear_forward(x.caption_sem, p.semantic_depth.caption_in);
  AttentionOutput sd = mha_forward(c_d, t.h_l_d, p.semantic_depth.attn, &s.semantic_depth);
  t.h_g_r = std::move(sr.updated);
  t.h_g_d = std::move(sd.updated);
  t.stage_weights.emplace_back("semantic_rgb", std::move(sr.avg_weights));
  t.stage_weights.emplace_back("semantic_depth", std::move(sd.avg_weights));

  s.h_v = fuse_hv(t.h_g_r, t.h_g_d, p.lambda1, p.lambda2);
  require(s.h_v.all_finite(), ErrorCode::kNonFinite, "environment embedding is not finite");
  return s;
}

void pipeline_backward(const BundleTensors& x, const PipelineState& s, const PipelineParams& p,
                       const Matrix& d_hv, PipelineParams& grad) {
  require(d_hv.same_shape(s.h_v), ErrorCode::kDimensionMismatch,
          "upstream gradient does not match h_v");
  const PipelineTrace& t = s.trace;
  const std::size_t m = x.rgb_patch.rows();

  auto stream = [&](double lambda, const MhaCache& sem_cache, const SemanticParams& sem,
                    SemanticParams& sem_grad, const MhaCache& local_cache,
                    const LocalAwareParams& local, LocalAwareParams& local_grad,
                    const Matrix& global_raw, const std::vector<std::size_t>& indices,
                    const Matrix& patch_raw, LinearParams& patch_grad) {
    Matrix d_hg = d_hv;
    d_hg *= lambda;
    const MhaInputGrads gs = mha_backward(sem_cache, sem.attn, d_hg, sem_grad.attn);
    linear_accumulate_grad(x.caption_sem, gs.d_query, sem_grad.caption_in);
    const MhaInputGrads gl = mha_backward(local_cache, local.attn, gs.d_context, local_grad.attn);
    linear_accumulate_grad(global_raw, gl.d_context, local_grad.global_in);
    // The selected rows feed the local stage both as queries and through the residual.
    Matrix d_selected = gs.d_context;
    d_selected += gl.d_query;
    Matrix d_proj(m, d_selected.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      auto src = d_selected.row(i);
      auto dst = d_proj.row(indices[i]);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
    linear_accumulate_grad(patch_raw, d_proj, patch_grad);
  };

  stream(p.lambda1, s.semantic_rgb, p.semantic_rgb, grad.semantic_rgb, s.local_rgb, p.local_rgb,
         grad.local_rgb, x.rgb_global, t.omega, x.rgb_patch, grad.rgb_detector.patch_in);
  stream(p.lambda2, s.semantic_depth, p.semantic_depth, grad.semantic_depth, s.local_depth,
         p.local_depth, grad.local_depth, x.depth_global, t.omega_depth, x.depth_patch,
         grad.depth_detector.patch_in);
}

std::pair<EnvironmentEmbedding, PipelineTrace> compute_environment_embedding(
    const FeatureBundle& bundle, const PipelineParams& p, std::size_t k, TopkMode mode) {
  validate(p);
  const BundleTensors x = BundleTensors::from_bundle(bundle);
  PipelineState s = pipeline_forward(x, p, k, mode);
  EnvironmentEmbedding e;
  e.h_v.assign(s.h_v.values().begin(), s.h_v.values().end());
  e.k = k;
  e.mode = mode;
  e.sample_id = bundle.sample_id;
  return {std::move(e), std::move(s.trace)};
}

}  // namespace m2se
