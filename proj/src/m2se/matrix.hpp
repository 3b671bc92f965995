#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace m2se {

// Dense row-major matrix of doubles. Vectors are 1 x n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> values);
  static Matrix from_floats(std::size_t rows, std::size_t cols,
                            std::span<const float> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double v);
  bool same_shape(const Matrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  bool all_finite() const noexcept;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// Adds the 1 x cols row vector to every row, in place.
void add_row_broadcast(Matrix& x, const Matrix& row);
// Column-wise sum, returned as 1 x cols.
Matrix column_sums(const Matrix& x);

// Columns [begin, begin + count) as a new matrix.
Matrix slice_cols(const Matrix& x, std::size_t begin, std::size_t count);
// Writes src into dst starting at column begin.
void set_cols(Matrix& dst, const Matrix& src, std::size_t begin);
void add_cols(Matrix& dst, const Matrix& src, std::size_t begin);

// Rows at the given indices, in order.
Matrix gather_rows(const Matrix& x, std::span<const std::size_t> indices);

double sum(const Matrix& x);
double squared_norm(const Matrix& x);
double max_abs(const Matrix& x);

}  // namespace m2se
