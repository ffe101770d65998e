#include "cocl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "cocl/error.hpp"

namespace cocl {

namespace {

std::string shape(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw NumericalError(std::string(what) + ": non-finite entry");
  }
}

void require_same_size(const DenseVector& a, const DenseVector& b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": length " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape " + shape(a.rows(), a.cols()) + " vs " +
                         shape(b.rows(), b.cols()));
  }
}

// Owned (aligned) Eigen copy; keeps vectorized kernels independent of the
// source buffer's alignment.
Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

struct Svd {
  Eigen::MatrixXd u;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd v;
  std::size_t rank = 0;
};

Svd thin_svd(const DenseMatrix& m) {
  Svd out;
  const auto e = to_eigen(m);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("SVD failed to converge for " + shape(m.rows(), m.cols()) + " matrix");
  }
  out.u = svd.matrixU();
  out.sigma = svd.singularValues();
  out.v = svd.matrixV();
  const double sigma_max = out.sigma.size() > 0 ? out.sigma(0) : 0.0;
  const double cutoff = static_cast<double>(std::max(m.rows(), m.cols())) *
                        std::numeric_limits<double>::epsilon() * sigma_max;
  for (Eigen::Index i = 0; i < out.sigma.size(); ++i) {
    if (out.sigma(i) > cutoff) ++out.rank;
  }
  return out;
}

}  // namespace

DenseVector::DenseVector(std::size_t len, double fill) : data_(len, fill) {}

DenseVector::DenseVector(std::vector<double> entries) : data_(std::move(entries)) {
  require_finite(data_, "DenseVector");
}

DenseVector::DenseVector(std::initializer_list<double> entries) : data_(entries) {
  require_finite(data_, "DenseVector");
}

DenseVector DenseVector::segment(std::size_t offset, std::size_t len) const {
  if (offset + len > size()) throw DimensionError("segment out of range");
  DenseVector out(len);
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(offset), len, out.data_.begin());
  return out;
}

void DenseVector::set_segment(std::size_t offset, const DenseVector& values) {
  if (offset + values.size() > size()) throw DimensionError("set_segment out of range");
  std::copy(values.data_.begin(), values.data_.end(), data_.begin() + static_cast<std::ptrdiff_t>(offset));
}

bool DenseVector::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("DenseMatrix " + shape(rows, cols) + " given " + std::to_string(data_.size()) +
                         " entries");
  }
  require_finite(data_, "DenseMatrix");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::column_range(std::size_t first, std::size_t count) const {
  if (first + count > cols_) {
    throw DimensionError("column_range [" + std::to_string(first) + ", " + std::to_string(first + count) +
                         ") exceeds " + std::to_string(cols_) + " columns");
  }
  DenseMatrix out(rows_, count);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = (*this)(r, first + c);
  return out;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  return out;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape(a.rows(), a.cols()) + " x " + shape(b.rows(), b.cols()));
  }
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

DenseVector matvec(const DenseMatrix& a, const DenseVector& x) {
  if (a.cols() != x.size()) {
    throw DimensionError("matvec: " + shape(a.rows(), a.cols()) + " x vector of length " +
                         std::to_string(x.size()));
  }
  DenseVector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
  return out;
}

DenseVector operator+(const DenseVector& a, const DenseVector& b) {
  require_same_size(a, b, "vector +");
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

DenseVector operator-(const DenseVector& a, const DenseVector& b) {
  require_same_size(a, b, "vector -");
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

DenseVector operator*(double s, const DenseVector& a) {
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

DenseVector& operator+=(DenseVector& a, const DenseVector& b) {
  require_same_size(a, b, "vector +=");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "matrix +");
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) + b(r, c);
  return out;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "matrix -");
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) - b(r, c);
  return out;
}

DenseMatrix operator*(double s, const DenseMatrix& a) {
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = s * a(r, c);
  return out;
}

double dot(const DenseVector& a, const DenseVector& b) {
  require_same_size(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(const DenseVector& a) { return dot(a, a); }

double norm(const DenseVector& a) { return std::sqrt(squared_norm(a)); }

double max_abs(const DenseVector& a) {
  double m = 0.0;
  for (double x : a.view()) m = std::max(m, std::abs(x));
  return m;
}

double frobenius_norm(const DenseMatrix& a) {
  double acc = 0.0;
  for (double x : a.view()) acc += x * x;
  return std::sqrt(acc);
}

DenseMatrix hstack(std::span<const DenseMatrix> blocks) {
  if (blocks.empty()) return {};
  const std::size_t rows = blocks.front().rows();
  std::size_t cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) throw DimensionError("hstack: blocks differ in height");
    cols += b.cols();
  }
  DenseMatrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < b.cols(); ++c) out(r, offset + c) = b(r, c);
    offset += b.cols();
  }
  return out;
}

DenseMatrix vstack(std::span<const DenseMatrix> blocks) {
  if (blocks.empty()) return {};
  const std::size_t cols = blocks.front().cols();
  std::size_t rows = 0;
  for (const auto& b : blocks) {
    if (b.cols() != cols) throw DimensionError("vstack: blocks differ in width");
    rows += b.rows();
  }
  DenseMatrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    for (std::size_t r = 0; r < b.rows(); ++r)
      for (std::size_t c = 0; c < cols; ++c) out(offset + r, c) = b(r, c);
    offset += b.rows();
  }
  return out;
}

DenseVector concat(std::span<const DenseVector> parts) {
  std::size_t len = 0;
  for (const auto& p : parts) len += p.size();
  DenseVector out(len);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    out.set_segment(offset, p);
    offset += p.size();
  }
  return out;
}

Pseudoinverse pinv_with_rank(const DenseMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return {DenseMatrix(m.cols(), m.rows()), 0};
  const Svd svd = thin_svd(m);
  Eigen::MatrixXd scaled_v = svd.v;
  for (Eigen::Index i = 0; i < svd.sigma.size(); ++i) {
    const bool kept = static_cast<std::size_t>(i) < svd.rank;
    scaled_v.col(i) *= kept ? 1.0 / svd.sigma(i) : 0.0;
  }
  const Eigen::MatrixXd p = scaled_v * svd.u.transpose();
  DenseMatrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c)
      out(r, c) = p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return {std::move(out), svd.rank};
}

DenseMatrix pinv(const DenseMatrix& m) { return pinv_with_rank(m).matrix; }

DenseVector min_norm_solve(const DenseMatrix& a, const DenseVector& y) {
  if (a.rows() != y.size()) {
    throw DimensionError("min_norm_solve: " + shape(a.rows(), a.cols()) + " system with " +
                         std::to_string(y.size()) + " targets");
  }
  if (a.rows() == 0 || a.cols() == 0) return DenseVector(a.cols());
  const Svd svd = thin_svd(a);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = y[i];
  Eigen::VectorXd coeffs = svd.u.transpose() * rhs;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    coeffs(i) = static_cast<std::size_t>(i) < svd.rank ? coeffs(i) / svd.sigma(i) : 0.0;
  }
  const Eigen::VectorXd x = svd.v * coeffs;
  DenseVector out(a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace cocl
