#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "leo/channel_model.hpp"
#include "leo/complex_linalg.hpp"
#include "leo/rng.hpp"

namespace leo::test {

inline CMatrix random_matrix(std::size_t r, std::size_t c, Engine& eng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix m(r, c);
  for (auto& z : m.values()) z = cplx(n(eng), n(eng));
  return m;
}

inline CVector random_vector(std::size_t r, Engine& eng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CVector v(r);
  for (auto& z : v) z = cplx(n(eng), n(eng));
  return v;
}

// A A^H + shift I
inline CMatrix random_hpd(std::size_t n, Engine& eng, double shift = 1.0) {
  const auto a = random_matrix(n, n, eng);
  auto m = matmul(a, hermitian(a));
  for (std::size_t i = 0; i < n; ++i) m(i, i) += shift;
  return m;
}

inline Eigen::MatrixXcd to_eigen(const CMatrix& m) {
  Eigen::MatrixXcd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

inline Eigen::VectorXcd to_eigen(const CVector& v) {
  Eigen::VectorXcd e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e(i) = v[i];
  return e;
}

inline CMatrix from_eigen(const Eigen::MatrixXcd& e) {
  CMatrix m(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

inline double max_abs_diff(const CMatrix& a, const CMatrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
  }
  return d;
}

inline ChannelSet make_cs(std::size_t nx, std::size_t ny, std::size_t k, Seed seed,
                          double p_max = 10.0) {
  ChannelDistributionSpec dist;
  dist.reference_power = p_max;
  return draw_channel_set({nx, ny, 0.5}, k, seed, dist);
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Engine& eng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), eng);
  return p;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace leo::test
