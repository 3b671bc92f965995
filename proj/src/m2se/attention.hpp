#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "m2se/matrix.hpp"
#include "m2se/rng.hpp"

namespace m2se {

// y = x * weight + bias, weight is d_in x d_out, bias is 1 x d_out.
struct LinearParams {
  Matrix weight;
  Matrix bias;

  std::size_t d_in() const noexcept { return weight.rows(); }
  std::size_t d_out() const noexcept { return weight.cols(); }

  static LinearParams zeros(std::size_t d_in, std::size_t d_out);
  // Uniform in +-sqrt(6 / (d_in + d_out)), zero bias.
  static LinearParams xavier(std::size_t d_in, std::size_t d_out, Rng& rng);
  static LinearParams identity(std::size_t n);
};

Matrix linear_forward(const Matrix& x, const LinearParams& p);

// Accumulates d(loss)/d(params) into grad and returns d(loss)/dx.
Matrix linear_backward(const Matrix& x, const LinearParams& p, const Matrix& dy,
                       LinearParams& grad);
// Parameter half of linear_backward, for inputs that need no gradient.
void linear_accumulate_grad(const Matrix& x, const Matrix& dy, LinearParams& grad);

Matrix softmax_rows(const Matrix& x);

struct MhaParams {
  std::size_t heads = 1;
  LinearParams query;
  LinearParams key;
  LinearParams value;
  LinearParams output;

  std::size_t d_model() const noexcept { return query.d_in(); }

  static MhaParams zeros(std::size_t d_model, std::size_t heads);
  static MhaParams xavier(std::size_t d_model, std::size_t heads, Rng& rng);
  static MhaParams identity(std::size_t d_model, std::size_t heads);
};

void validate(const MhaParams& p);

struct AttentionOutput {
  Matrix updated;      // Q x d_model
  Matrix avg_weights;  // Q x S, per-head softmax averaged over heads
};

// Everything the backward pass needs from a forward call.
struct MhaCache {
  Matrix query_in;
  Matrix context_in;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, Q x S
  Matrix concat;              // Q x d_model, heads side by side
};

AttentionOutput mha_forward(const Matrix& query, const Matrix& context, const MhaParams& p,
                            MhaCache* cache = nullptr);

struct MhaInputGrads {
  Matrix d_query;
  Matrix d_context;
};

// Gradient of a loss through `updated`; avg_weights is treated as a
// non-differentiable side output.
MhaInputGrads mha_backward(const MhaCache& cache, const MhaParams& p, const Matrix& d_updated,
                           MhaParams& grad);

// Named views over trainable tensors, used by checkpoints, optimisers and
// the gradient checker. Order is stable.
struct NamedTensor {
  std::string name;
  Matrix* tensor;
};

void append_tensors(std::vector<NamedTensor>& out, const std::string& prefix, LinearParams& p);
void append_tensors(std::vector<NamedTensor>& out, const std::string& prefix, MhaParams& p);

}  // namespace m2se
