#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace leo {

using cplx = std::complex<double>;

/// Fixed-length dense complex vector.
class CVector {
 public:
  CVector() = default;
  explicit CVector(std::size_t n, cplx fill = {}) : data_(n, fill) {}
  CVector(std::initializer_list<cplx> init) : data_(init) {}
  explicit CVector(std::vector<cplx> data) : data_(std::move(data)) {}

  std::size_t size() const noexcept { return data_.size(); }
  cplx& operator[](std::size_t i) noexcept { return data_[i]; }
  const cplx& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<cplx> values() noexcept { return data_; }
  std::span<const cplx> values() const noexcept { return data_; }
  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool all_finite() const noexcept;

  bool operator==(const CVector&) const = default;

 private:
  std::vector<cplx> data_;
};

/// Dense complex matrix, row-major storage.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols, cplx fill = {})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  /// Row-wise nested initializer; all rows must have equal length.
  CMatrix(std::initializer_list<std::initializer_list<cplx>> rows);

  static CMatrix identity(std::size_t n);
  /// Square matrix with `diag` on the diagonal.
  static CMatrix diagonal(std::span<const cplx> diag);
  /// Matrix whose columns are `cols` (all of equal length).
  static CMatrix from_columns(std::span<const CVector> cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  cplx& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<cplx> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const cplx> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  CVector col(std::size_t c) const;
  void set_col(std::size_t c, const CVector& v);

  std::span<cplx> values() noexcept { return data_; }
  std::span<const cplx> values() const noexcept { return data_; }

  bool all_finite() const noexcept;

  CMatrix& operator+=(const CMatrix& o);
  CMatrix& operator-=(const CMatrix& o);
  CMatrix& operator*=(cplx s) noexcept;

  bool operator==(const CMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

CMatrix operator+(CMatrix a, const CMatrix& b);
CMatrix operator-(CMatrix a, const CMatrix& b);
CMatrix operator*(cplx s, CMatrix a);

/// Conjugate transpose.
CMatrix hermitian(const CMatrix& m);

/// Complex matrix product; throws ShapeError when a.cols() != b.rows().
CMatrix matmul(const CMatrix& a, const CMatrix& b);

CVector matvec(const CMatrix& a, const CVector& x);

/// a^H b.
cplx dot(const CVector& a, const CVector& b);

double norm_squared(const CVector& v);
double norm(const CVector& v);

double frobenius_norm(const CMatrix& m);
double frobenius_norm_squared(const CMatrix& m);

/// Cholesky factor M = L L^H of a Hermitian positive definite matrix.
///
/// Only the lower triangle of the input is read. A non-positive (or
/// non-finite) pivot raises NumericError naming the pivot index.
class Cholesky {
 public:
  explicit Cholesky(const CMatrix& m);

  std::size_t size() const noexcept { return n_; }
  CVector solve(const CVector& rhs) const;
  const CMatrix& lower() const noexcept { return l_; }

 private:
  std::size_t n_;
  CMatrix l_;
};

/// Solves m x = rhs for Hermitian positive definite m via Cholesky.
CVector solve_hpd(const CMatrix& m, const CVector& rhs);

}  // namespace leo
