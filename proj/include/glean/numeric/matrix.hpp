#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace glean::numeric {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. The shape is fixed at construction.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double value);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Allocating product; throws DimensionError when W.cols() != v.size().
Vector matvec(const Matrix& W, std::span<const double> v);

// out += scale * W * x
void matvec_accumulate(const Matrix& W, std::span<const double> x, std::span<double> out,
                       double scale = 1.0);

// out += W^T * g
void matvec_transpose_accumulate(const Matrix& W, std::span<const double> g,
                                 std::span<double> out);

// G += scale * a * b^T
void outer_accumulate(Matrix& G, std::span<const double> a, std::span<const double> b,
                      double scale = 1.0);

void tanh_inplace(std::span<double> v);
void exp_inplace(std::span<double> v);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);
bool all_finite(std::span<const double> v);

}  // namespace glean::numeric
