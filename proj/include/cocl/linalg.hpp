#pragma once

// Dense real linear algebra kernel.
//
// All arithmetic is IEEE double. Products and reductions use plain loops with
// a fixed summation order so that two evaluations of the same expression on
// the same inputs are bit-identical, which the distributed-vs-monolithic
// equivalence checks rely on.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace cocl {

class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t len, double fill = 0.0);
  // Throws NumericalError if any entry is NaN or infinite.
  explicit DenseVector(std::vector<double> entries);
  DenseVector(std::initializer_list<double> entries);

  static DenseVector ones(std::size_t len) { return DenseVector(len, 1.0); }

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }

  std::span<const double> view() const noexcept { return data_; }
  std::span<double> view() noexcept { return data_; }
  const std::vector<double>& entries() const noexcept { return data_; }

  DenseVector segment(std::size_t offset, std::size_t len) const;
  void set_segment(std::size_t offset, const DenseVector& values);

  bool all_finite() const noexcept;

  friend bool operator==(const DenseVector&, const DenseVector&) = default;

 private:
  std::vector<double> data_;
};

// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Throws DimensionError on length mismatch, NumericalError on non-finite entries.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> view() const noexcept { return data_; }

  // Copy of columns [first, first + count).
  DenseMatrix column_range(std::size_t first, std::size_t count) const;
  DenseMatrix transpose() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseVector matvec(const DenseMatrix& a, const DenseVector& x);

DenseVector operator+(const DenseVector& a, const DenseVector& b);
DenseVector operator-(const DenseVector& a, const DenseVector& b);
DenseVector operator*(double s, const DenseVector& a);
DenseVector& operator+=(DenseVector& a, const DenseVector& b);

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& a);

double dot(const DenseVector& a, const DenseVector& b);
double squared_norm(const DenseVector& a);
double norm(const DenseVector& a);
double max_abs(const DenseVector& a);
double frobenius_norm(const DenseMatrix& a);

// Side-by-side concatenation of equal-height blocks.
DenseMatrix hstack(std::span<const DenseMatrix> blocks);
// Row stacking of equal-width blocks.
DenseMatrix vstack(std::span<const DenseMatrix> blocks);
DenseVector concat(std::span<const DenseVector> parts);

// Moore-Penrose pseudoinverse via SVD. Singular values
// sigma_i <= max(rows, cols) * eps * sigma_max are treated as zero.
struct Pseudoinverse {
  DenseMatrix matrix;
  std::size_t rank = 0;
};

Pseudoinverse pinv_with_rank(const DenseMatrix& m);
DenseMatrix pinv(const DenseMatrix& m);

// A^+ y: the least-squares minimizer of smallest Euclidean norm.
DenseVector min_norm_solve(const DenseMatrix& a, const DenseVector& y);

}  // namespace cocl
