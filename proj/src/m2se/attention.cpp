#include "m2se/attention.hpp"

#include <algorithm>
#include <cmath>

#include "m2se/error.hpp"

namespace m2se {

LinearParams LinearParams::zeros(std::size_t d_in, std::size_t d_out) {
  require(d_in >= 1 && d_out >= 1, ErrorCode::kInvalidArgument, "linear dims must be positive");
  return {Matrix(d_in, d_out), Matrix(1, d_out)};
}

LinearParams LinearParams::xavier(std::size_t d_in, std::size_t d_out, Rng& rng) {
  LinearParams p = zeros(d_in, d_out);
  const double a = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
  for (double& w : p.weight.values()) w = rng.uniform(-a, a);
  return p;
}

LinearParams LinearParams::identity(std::size_t n) {
  LinearParams p = zeros(n, n);
  p.weight = Matrix::identity(n);
  return p;
}

Matrix linear_forward(const Matrix& x, const LinearParams& p) {
  require(x.cols() == p.d_in(), ErrorCode::kDimensionMismatch,
          "linear: input width " + std::to_string(x.cols()) + " vs weight rows " +
              std::to_string(p.d_in()));
  Matrix y = matmul(x, p.weight);
  add_row_broadcast(y, p.bias);
  return y;
}

Matrix linear_backward(const Matrix& x, const LinearParams& p, const Matrix& dy,
                       LinearParams& grad) {
  require(dy.rows() == x.rows() && dy.cols() == p.d_out(), ErrorCode::kDimensionMismatch,
          "linear_backward: upstream gradient shape");
  linear_accumulate_grad(x, dy, grad);
  return matmul_nt(dy, p.weight);
}

void linear_accumulate_grad(const Matrix& x, const Matrix& dy, LinearParams& grad) {
  require(dy.rows() == x.rows(), ErrorCode::kDimensionMismatch,
          "linear_backward: row count mismatch");
  grad.weight += matmul_tn(x, dy);
  grad.bias += column_sums(dy);
}

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto in = x.row(i);
    auto out = y.row(i);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::exp(in[j] - mx);
      total += out[j];
    }
    for (double& v : out) v /= total;
  }
  return y;
}

MhaParams MhaParams::zeros(std::size_t d_model, std::size_t heads) {
  MhaParams p;
  p.heads = heads;
  p.query = LinearParams::zeros(d_model, d_model);
  p.key = LinearParams::zeros(d_model, d_model);
  p.value = LinearParams::zeros(d_model, d_model);
  p.output = LinearParams::zeros(d_model, d_model);
  validate(p);
  return p;
}

MhaParams MhaParams::xavier(std::size_t d_model, std::size_t heads, Rng& rng) {
  MhaParams p;
  p.heads = heads;
  p.query = LinearParams::xavier(d_model, d_model, rng);
  p.key = LinearParams::xavier(d_model, d_model, rng);
  p.value = LinearParams::xavier(d_model, d_model, rng);
  p.output = LinearParams::xavier(d_model, d_model, rng);
  validate(p);
  return p;
}

MhaParams MhaParams::identity(std::size_t d_model, std::size_t heads) {
  MhaParams p;
  p.heads = heads;
  p.query = LinearParams::identity(d_model);
  p.key = LinearParams::identity(d_model);
  p.value = LinearParams::identity(d_model);
  p.output = LinearParams::identity(d_model);
  validate(p);
  return p;
}

void validate(const MhaParams& p) {
  const std::size_t dm = p.d_model();
  require(dm >= 1 && p.heads >= 1 && dm % p.heads == 0, ErrorCode::kInvalidArgument,
          "d_model " + std::to_string(dm) + " is not divisible by " + std::to_string(p.heads) +
              " heads");
  for (const LinearParams* l : {&p.query, &p.key, &p.value, &p.output}) {
    require(l->d_in() == dm && l->d_out() == dm && l->bias.cols() == dm,
            ErrorCode::kDimensionMismatch, "attention projections must be d_model x d_model");
  }
}

AttentionOutput mha_forward(const Matrix& query, const Matrix& context, const MhaParams& p,
                            MhaCache* cache) {
  const std::size_t dm = p.d_model();
  require(query.cols() == dm && context.cols() == dm, ErrorCode::kDimensionMismatch,
          "attention inputs must have d_model = " + std::to_string(dm) + " columns");
  require(context.rows() >= 1, ErrorCode::kDimensionMismatch, "attention context is empty");
  require(p.heads >= 1 && dm % p.heads == 0, ErrorCode::kInvalidArgument,
          "d_model not divisible by heads");

  const std::size_t dh = dm / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t nq = query.rows(), ns = context.rows();

  Matrix concat(nq, dm);
  Matrix avg(nq, ns);
  std::vector<Matrix> probs;
  probs.reserve(p.heads);
  Matrix q, k, v;
  AttentionOutput out;

  if (ns == 1) {
    // One key: every weight is 1 and every query receives the same row. The
    // scores are constant, so queries get no gradient and q is never read
    // for anything but a zero product.
    if (cache) q = Matrix(nq, dm);
    k = linear_forward(context, p.key);
    v = linear_forward(context, p.value);
    avg.fill(1.0);
    for (std::size_t h = 0; h < p.heads; ++h) probs.emplace_back(nq, 1, 1.0);
    const Matrix row = linear_forward(v, p.output);
    out.updated = Matrix(nq, dm);
    for (std::size_t i = 0; i < nq; ++i) {
      std::copy(v.values().begin(), v.values().end(), concat.row(i).begin());
      std::copy(row.values().begin(), row.values().end(), out.updated.row(i).begin());
    }
  } else if (nq * (dm + p.heads * ns) < ns * dm) {
    // Few queries over many rows: fold the key and value projections into
    // the query side instead of projecting the whole context.
    q = linear_forward(query, p.query);
    for (std::size_t h = 0; h < p.heads; ++h) {
      const Matrix qh = slice_cols(q, h * dh, dh);
      Matrix scores = matmul_nt(matmul_nt(qh, slice_cols(p.key.weight, h * dh, dh)), context);
      const Matrix qb = matmul_nt(qh, slice_cols(p.key.bias, h * dh, dh));
      for (std::size_t i = 0; i < nq; ++i)
        for (std::size_t j = 0; j < ns; ++j) scores(i, j) += qb(i, 0);
      scores *= scale;
      Matrix prob = softmax_rows(scores);
      Matrix head = matmul(matmul(prob, context), slice_cols(p.value.weight, h * dh, dh));
      add_row_broadcast(head, slice_cols(p.value.bias, h * dh, dh));
      set_cols(concat, head, h * dh);
      avg += prob;
      probs.push_back(std::move(prob));
    }
    avg *= 1.0 / static_cast<double>(p.heads);
    out.updated = linear_forward(concat, p.output);
  } else {
    q = linear_forward(query, p.query);
    k = linear_forward(context, p.key);
    v = linear_forward(context, p.value);
    for (std::size_t h = 0; h < p.heads; ++h) {
      Matrix scores = matmul_nt(slice_cols(q, h * dh, dh), slice_cols(k, h * dh, dh));
      scores *= scale;
      Matrix prob = softmax_rows(scores);
      set_cols(concat, matmul(prob, slice_cols(v, h * dh, dh)), h * dh);
      avg += prob;
      probs.push_back(std::move(prob));
    }
    avg *= 1.0 / static_cast<double>(p.heads);
    out.updated = linear_forward(concat, p.output);
  }
  out.avg_weights = std::move(avg);

  if (cache) {
    cache->query_in = query;
    cache->context_in = context;
    cache->q = std::move(q);
    // Left empty by the folded path; the backward pass recomputes them.
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->concat = std::move(concat);
  }
  return out;
}

MhaInputGrads mha_backward(const MhaCache& c, const MhaParams& p, const Matrix& d_updated,
                           MhaParams& grad) {
  const std::size_t dm = p.d_model();
  const std::size_t dh = dm / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Matrix d_concat = linear_backward(c.concat, p.output, d_updated, grad.output);
  const Matrix k = c.k.empty() ? linear_forward(c.context_in, p.key) : c.k;
  const Matrix v = c.v.empty() ? linear_forward(c.context_in, p.value) : c.v;
  Matrix dq(c.q.rows(), dm);
  Matrix dk(k.rows(), dm);
  Matrix dv(v.rows(), dm);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Matrix& prob = c.probs[h];
    const Matrix d_head = slice_cols(d_concat, h * dh, dh);
    const Matrix vh = slice_cols(v, h * dh, dh);
    Matrix d_prob = matmul_nt(d_head, vh);
    add_cols(dv, matmul_tn(prob, d_head), h * dh);

    // softmax Jacobian: ds = p * (dp - <dp, p>)
    Matrix d_scores(prob.rows(), prob.cols());
    for (std::size_t i = 0; i < prob.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < prob.cols(); ++j) dot += d_prob(i, j) * prob(i, j);
      for (std::size_t j = 0; j < prob.cols(); ++j)
        d_scores(i, j) = prob(i, j) * (d_prob(i, j) - dot) * scale;
    }
    add_cols(dq, matmul(d_scores, slice_cols(k, h * dh, dh)), h * dh);
    add_cols(dk, matmul_tn(d_scores, slice_cols(c.q, h * dh, dh)), h * dh);
  }

  MhaInputGrads g;
  g.d_query = linear_backward(c.query_in, p.query, dq, grad.query);
  g.d_context = linear_backward(c.context_in, p.key, dk, grad.key);
  g.d_context += linear_backward(c.context_in, p.value, dv, grad.value);
  return g;
}

void append_tensors(std::vector<NamedTensor>& out, const std::string& prefix, LinearParams& p) {
  out.push_back({prefix + ".weight", &p.weight});
  out.push_back({prefix + ".bias", &p.bias});
}

void append_tensors(std::vector<NamedTensor>& out, const std::string& prefix, MhaParams& p) {
  append_tensors(out, prefix + ".query", p.query);
  append_tensors(out, prefix + ".key", p.key);
  append_tensors(out, prefix + ".value", p.value);
  append_tensors(out, prefix + ".output", p.output);
}

}  // namespace m2se
