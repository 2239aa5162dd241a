#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace grczsl {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  std::string shape_string() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = a · bᵀ (a: n×k, b: m×k → n×m)
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
// out = a · b (a: n×k, b: k×m → n×m)
Matrix matmul(const Matrix& a, const Matrix& b);
// out = aᵀ · b (a: n×k, b: n×m → k×m)
Matrix transposed_matmul(const Matrix& a, const Matrix& b);

// Horizontal concatenation; row counts must agree.
Matrix hconcat(const Matrix& left, const Matrix& right);
// Columns [begin, begin + count).
Matrix column_slice(const Matrix& m, std::size_t begin, std::size_t count);
// Rows picked by index, in the given order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);
// Vertical concatenation; column counts must agree (an empty matrix is skipped).
Matrix vconcat(const Matrix& top, const Matrix& bottom);

}  // namespace grczsl
