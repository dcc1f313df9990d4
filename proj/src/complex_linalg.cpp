#include "leo/complex_linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "leo/errors.hpp"

namespace leo {

namespace {

bool finite(cplx z) noexcept { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

std::string shape_str(const CMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

bool CVector::all_finite() const noexcept {
  for (const auto& z : data_) {
    if (!finite(z)) return false;
  }
  return true;
}

CMatrix::CMatrix(std::initializer_list<std::initializer_list<cplx>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged initializer for CMatrix");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

CMatrix CMatrix::identity(std::size_t n) {
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CMatrix CMatrix::diagonal(std::span<const cplx> diag) {
  CMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

CMatrix CMatrix::from_columns(std::span<const CVector> cols) {
  if (cols.empty()) return {};
  const std::size_t n = cols.front().size();
  CMatrix m(n, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c].size() != n) throw ShapeError("columns of unequal length");
    for (std::size_t r = 0; r < n; ++r) m(r, c) = cols[c][r];
  }
  return m;
}

CVector CMatrix::col(std::size_t c) const {
  CVector v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

void CMatrix::set_col(std::size_t c, const CVector& v) {
  if (v.size() != rows_) throw ShapeError("set_col: length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
}

bool CMatrix::all_finite() const noexcept {
  for (const auto& z : data_) {
    if (!finite(z)) return false;
  }
  return true;
}

CMatrix& CMatrix::operator+=(const CMatrix& o) {
  if (o.rows_ != rows_ || o.cols_ != cols_) {
    throw ShapeError("matrix sum: " + shape_str(*this) + " vs " + shape_str(o));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

CMatrix& CMatrix::operator-=(const CMatrix& o) {
  if (o.rows_ != rows_ || o.cols_ != cols_) {
    throw ShapeError("matrix difference: " + shape_str(*this) + " vs " + shape_str(o));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

CMatrix& CMatrix::operator*=(cplx s) noexcept {
  for (auto& z : data_) z *= s;
  return *this;
}

CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
CMatrix operator*(cplx s, CMatrix a) { return a *= s; }

CMatrix hermitian(const CMatrix& m) {
  CMatrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = std::conj(m(r, c));
  }
  return out;
}

CMatrix matmul(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a) + " times " + shape_str(b));
  }
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  CMatrix out(n, m);
  if (n == 0 || inner == 0 || m == 0) return out;
  // Real/imag split so the inner loops vectorize; rows of a go in blocks of
  // four so each row of b is loaded once per block.
  constexpr std::size_t kBlock = 4;
  std::vector<double> br(inner * m), bi(inner * m), cr(kBlock * m), ci(kBlock * m);
  for (std::size_t k = 0; k < inner; ++k) {
    const auto row = b.row(k);
    for (std::size_t j = 0; j < m; ++j) {
      br[k * m + j] = row[j].real();
      bi[k * m + j] = row[j].imag();
    }
  }
  for (std::size_t i0 = 0; i0 < n; i0 += kBlock) {
    const std::size_t nb = std::min(kBlock, n - i0);
    std::fill(cr.begin(), cr.end(), 0.0);
    std::fill(ci.begin(), ci.end(), 0.0);
    for (std::size_t k = 0; k < inner; ++k) {
      const double* __restrict xr = br.data() + k * m;
      const double* __restrict xi = bi.data() + k * m;
      for (std::size_t r = 0; r < nb; ++r) {
        const cplx aik = a(i0 + r, k);
        if (aik == cplx{}) continue;
        const double ar = aik.real(), ai = aik.imag();
        double* __restrict yr = cr.data() + r * m;
        double* __restrict yi = ci.data() + r * m;
        for (std::size_t j = 0; j < m; ++j) {
          yr[j] += ar * xr[j] - ai * xi[j];
          yi[j] += ar * xi[j] + ai * xr[j];
        }
      }
    }
    for (std::size_t r = 0; r < nb; ++r) {
      auto out_row = out.row(i0 + r);
      for (std::size_t j = 0; j < m; ++j) out_row[j] = cplx(cr[r * m + j], ci[r * m + j]);
    }
  }
  return out;
}

CVector matvec(const CMatrix& a, const CVector& x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: " + shape_str(a) + " times vector");
  CVector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cplx acc{};
    const auto r = a.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) acc += r[j] * x[j];
    y[i] = acc;
  }
  return y;
}

cplx dot(const CVector& a, const CVector& b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  cplx acc{};
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

double norm_squared(const CVector& v) {
  double acc = 0.0;
  for (const auto& z : v) acc += std::norm(z);
  return acc;
}

double norm(const CVector& v) { return std::sqrt(norm_squared(v)); }

double frobenius_norm_squared(const CMatrix& m) {
  double acc = 0.0;
  for (const auto& z : m.values()) acc += std::norm(z);
  return acc;
}

double frobenius_norm(const CMatrix& m) { return std::sqrt(frobenius_norm_squared(m)); }

Cholesky::Cholesky(const CMatrix& m) : n_(m.rows()), l_(m.rows(), m.rows()) {
  if (!m.square()) throw ShapeError("Cholesky: matrix is " + shape_str(m));
  for (std::size_t j = 0; j < n_; ++j) {
    double pivot = m(j, j).real();
    const auto lj = l_.row(j);
    for (std::size_t k = 0; k < j; ++k) pivot -= std::norm(lj[k]);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      throw NumericError("Cholesky: non-positive pivot at index " + std::to_string(j));
    }
    const double ljj = std::sqrt(pivot);
    l_(j, j) = ljj;
    const double inv = 1.0 / ljj;
    for (std::size_t i = j + 1; i < n_; ++i) {
      const auto li = l_.row(i);
      cplx acc = m(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= li[k] * std::conj(lj[k]);
      l_(i, j) = acc * inv;
    }
  }
}

CVector Cholesky::solve(const CVector& rhs) const {
  if (rhs.size() != n_) throw ShapeError("Cholesky::solve: length mismatch");
  // Forward substitution L y = rhs.
  CVector y(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    cplx acc = rhs[i];
    const auto li = l_.row(i);
    for (std::size_t k = 0; k < i; ++k) acc -= li[k] * y[k];
    y[i] = acc / li[i].real();
  }
  // Back substitution L^H x = y.
  CVector x(n_);
  for (std::size_t ii = n_; ii-- > 0;) {
    cplx acc = y[ii];
    for (std::size_t k = ii + 1; k < n_; ++k) acc -= std::conj(l_(k, ii)) * x[k];
    x[ii] = acc / l_(ii, ii).real();
  }
  return x;
}

CVector solve_hpd(const CMatrix& m, const CVector& rhs) { return Cholesky(m).solve(rhs); }

}  // namespace leo
