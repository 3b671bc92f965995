#include "m2se/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "m2se/error.hpp"

namespace m2se {

namespace {

void check_same(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kDimensionMismatch,
         std::string(op) + ": shape " + std::to_string(a.rows()) + "x" +
             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
             std::to_string(b.cols()));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows * cols, ErrorCode::kDimensionMismatch,
          "matrix data size does not match shape");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::from_floats(std::size_t rows, std::size_t cols,
                           std::span<const float> values) {
  require(values.size() == rows * cols, ErrorCode::kDimensionMismatch,
          "float buffer size does not match shape");
  return Matrix(rows, cols, std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& o) {
  check_same(*this, o, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  check_same(*this, o, "subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> view(const Matrix& m) {
  return {m.values().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

Eigen::Map<RowMajor> view(Matrix& m) {
  return {m.values().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorCode::kDimensionMismatch,
          "matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
              std::to_string(b.rows()));
  Matrix c(a.rows(), b.cols());
  if (!c.empty() && a.cols() > 0) view(c).noalias() = view(a) * view(b);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), ErrorCode::kDimensionMismatch,
          "matmul_tn: row counts differ");
  Matrix c(a.cols(), b.cols());
  if (!c.empty() && a.rows() > 0) view(c).noalias() = view(a).transpose() * view(b);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorCode::kDimensionMismatch,
          "matmul_nt: column counts differ");
  Matrix c(a.rows(), b.rows());
  if (!c.empty() && a.cols() > 0) view(c).noalias() = view(a) * view(b).transpose();
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

void add_row_broadcast(Matrix& x, const Matrix& row) {
  require(row.rows() == 1 && row.cols() == x.cols(), ErrorCode::kDimensionMismatch,
          "bias length does not match output width");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += row(0, j);
  }
}

Matrix column_sums(const Matrix& x) {
  Matrix s(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) s(0, j) += x(i, j);
  return s;
}

Matrix slice_cols(const Matrix& x, std::size_t begin, std::size_t count) {
  require(begin + count <= x.cols(), ErrorCode::kDimensionMismatch,
          "column slice out of range");
  Matrix out(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x(i, begin + j);
  return out;
}

void set_cols(Matrix& dst, const Matrix& src, std::size_t begin) {
  require(dst.rows() == src.rows() && begin + src.cols() <= dst.cols(),
          ErrorCode::kDimensionMismatch, "column write out of range");
  for (std::size_t i = 0; i < src.rows(); ++i)
    for (std::size_t j = 0; j < src.cols(); ++j) dst(i, begin + j) = src(i, j);
}

void add_cols(Matrix& dst, const Matrix& src, std::size_t begin) {
  require(dst.rows() == src.rows() && begin + src.cols() <= dst.cols(),
          ErrorCode::kDimensionMismatch, "column write out of range");
  for (std::size_t i = 0; i < src.rows(); ++i)
    for (std::size_t j = 0; j < src.cols(); ++j) dst(i, begin + j) += src(i, j);
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), x.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < x.rows(), ErrorCode::kInvalidArgument,
            "gather index " + std::to_string(indices[i]) + " out of range");
    auto src = x.row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

double sum(const Matrix& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return s;
}

double squared_norm(const Matrix& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  return s;
}

double max_abs(const Matrix& x) {
  double m = 0.0;
  for (double v : x.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace m2se
