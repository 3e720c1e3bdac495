#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace nmtune {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

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
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  Matrix transposed() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  /// this += s * other
  void axpy(double s, const Matrix& other);

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// M x D matrix of extracted embeddings, one sample per row.
using FeatureMatrix = Matrix;

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

/// a (m x k) * b (k x n)
Matrix matmul(const Matrix& a, const Matrix& b);
/// a (m x k) * b^T where b is (n x k)
Matrix matmul_bt(const Matrix& a, const Matrix& b);
/// a^T * b where a is (k x m), b is (k x n)
Matrix matmul_at(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Throws InvalidInput naming the first non-finite entry; also rejects empty
/// matrices.
void require_finite(const Matrix& m, const char* what = "matrix");
bool all_finite(const Matrix& m) noexcept;

/// Rows selected by index, in order.
Matrix take_rows(const Matrix& m, std::span<const std::size_t> indices);

/// Per-row L2 normalization; zero rows pass through unchanged.
Matrix row_normalize(const Matrix& f);

/// Unbiased sample covariance (D x D) of the rows. Requires at least two rows.
Matrix covariance(const Matrix& z);

/// Column means (length D).
std::vector<double> column_means(const Matrix& z);

/// Rows minus their column mean.
Matrix centered(const Matrix& z);

}  // namespace nmtune
