#include "glean/numeric/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "glean/error.hpp"

namespace glean::numeric {

namespace {

void require(bool ok, const char* op, std::size_t want, std::size_t got) {
  if (!ok) {
    throw DimensionError(std::string(op) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.row(i).begin());
    ++i;
  }
  return m;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Vector matvec(const Matrix& W, std::span<const double> v) {
  require(W.cols() == v.size(), "matvec", W.cols(), v.size());
  Vector out(W.rows(), 0.0);
  matvec_accumulate(W, v, out);
  return out;
}

void matvec_accumulate(const Matrix& W, std::span<const double> x, std::span<double> out,
                       double scale) {
  require(W.cols() == x.size(), "matvec_accumulate(x)", W.cols(), x.size());
  require(W.rows() == out.size(), "matvec_accumulate(out)", W.rows(), out.size());
  const std::size_t cols = W.cols();
  const double* w = W.values().data();
  const double* __restrict xv = x.data();
  for (std::size_t r = 0; r < W.rows(); ++r) {
    double acc = 0.0;
    const double* __restrict wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * xv[c];
    out[r] += scale * acc;
  }
}

void matvec_transpose_accumulate(const Matrix& W, std::span<const double> g,
                                 std::span<double> out) {
  require(W.rows() == g.size(), "matvec_transpose_accumulate(g)", W.rows(), g.size());
  require(W.cols() == out.size(), "matvec_transpose_accumulate(out)", W.cols(), out.size());
  const std::size_t cols = W.cols();
  const double* w = W.values().data();
  double* __restrict ov = out.data();
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* __restrict wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) ov[c] += wr[c] * gr;
  }
}

void outer_accumulate(Matrix& G, std::span<const double> a, std::span<const double> b,
                      double scale) {
  require(G.rows() == a.size(), "outer_accumulate(a)", G.rows(), a.size());
  require(G.cols() == b.size(), "outer_accumulate(b)", G.cols(), b.size());
  const std::size_t cols = G.cols();
  double* g = G.values().data();
  const double* __restrict bv = b.data();
  for (std::size_t r = 0; r < G.rows(); ++r) {
    const double ar = scale * a[r];
    if (ar == 0.0) continue;
    double* __restrict gr = g + r * cols;
    for (std::size_t c = 0; c < cols; ++c) gr[c] += ar * bv[c];
  }
}

void tanh_inplace(std::span<double> v) {
  for (double& x : v) x = std::tanh(x);
}

void exp_inplace(std::span<double> v) {
  for (double& x : v) x = std::exp(x);
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot", a.size(), b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace glean::numeric
