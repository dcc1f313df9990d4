#include "leo/system_model.hpp"

#include <cmath>
#include <numbers>

#include "leo/errors.hpp"

namespace leo {

namespace {

void check_shape(const ChannelSet& cs, const PrecodingMatrix& b) {
  if (b.rows() != cs.n_antennas() || b.cols() != cs.n_users()) {
    throw ShapeError("precoder is " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                     ", channel set needs " + std::to_string(cs.n_antennas()) + "x" +
                     std::to_string(cs.n_users()));
  }
}

// s(k, l) = v_k^H b_l.
CMatrix projections(const ChannelSet& cs, const PrecodingMatrix& b) {
  const std::size_t n = b.rows(), K = b.cols();
  CMatrix s(K, K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& v = cs.users[k].v;
    for (std::size_t r = 0; r < n; ++r) {
      const cplx vc = std::conj(v[r]);
      const auto row = b.row(r);
      for (std::size_t l = 0; l < K; ++l) s(k, l) += vc * row[l];
    }
  }
  return s;
}

}  // namespace

double transmit_power(const PrecodingMatrix& b) { return frobenius_norm_squared(b); }

double sinr_upper(const ChannelSet& cs, const PrecodingMatrix& b, std::size_t k) {
  check_shape(cs, b);
  const auto& u = cs.users.at(k);
  double signal = 0.0, interference = 0.0;
  for (std::size_t l = 0; l < b.cols(); ++l) {
    cplx s{};
    for (std::size_t r = 0; r < b.rows(); ++r) s += std::conj(u.v[r]) * b(r, l);
    const double p = u.gamma * std::norm(s);
    if (l == k) {
      signal = p;
    } else {
      interference += p;
    }
  }
  return signal / (interference + cs.n0);
}

double rate_from_sinr(double sinr) { return std::log1p(sinr) / std::numbers::ln2; }

std::vector<double> rate_upper(const ChannelSet& cs, const PrecodingMatrix& b) {
  std::vector<double> r(cs.n_users());
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = rate_from_sinr(sinr_upper(cs, b, k));
  return r;
}

double sinr_instant(const FastFadingDraw& draw, double n0, const PrecodingMatrix& b,
                    std::size_t k) {
  const auto& h = draw.h.at(k);
  if (h.size() != b.rows()) throw ShapeError("channel and precoder antenna counts differ");
  double signal = 0.0, interference = 0.0;
  for (std::size_t l = 0; l < b.cols(); ++l) {
    cplx s{};
    for (std::size_t r = 0; r < b.rows(); ++r) s += std::conj(h[r]) * b(r, l);
    if (l == k) {
      signal = std::norm(s);
    } else {
      interference += std::norm(s);
    }
  }
  return signal / (interference + n0);
}

RateEstimate rate_ergodic_mc(const ChannelSet& cs, const PrecodingMatrix& b,
                             std::size_t n_samples, Seed seed, const FadingSpec& fading) {
  check_shape(cs, b);
  if (n_samples == 0) throw ContractError("rate_ergodic_mc: n_samples must be >= 1");
  const std::size_t K = cs.n_users();
  // Welford updates; the textbook sum-of-squares form cancels badly when the
  // rate barely varies.
  std::vector<double> mean(K, 0.0), m2(K, 0.0);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto draw = draw_fast_fading(cs, fading, split_seed(seed, i));
    const double count = static_cast<double>(i + 1);
    for (std::size_t k = 0; k < K; ++k) {
      const double r = rate_from_sinr(sinr_instant(draw, cs.n0, b, k));
      const double delta = r - mean[k];
      mean[k] += delta / count;
      m2[k] += delta * (r - mean[k]);
    }
  }
  RateEstimate est;
  est.n_samples = n_samples;
  est.std_error.assign(K, 0.0);
  const double n = static_cast<double>(n_samples);
  for (std::size_t k = 0; k < K; ++k) {
    if (n_samples > 1) est.std_error[k] = std::sqrt(m2[k] / (n - 1.0) / n);
  }
  est.mean = std::move(mean);
  return est;
}

double total_power(const PowerModel& pm, const PrecodingMatrix& b) {
  return pm.xi * transmit_power(b) + pm.static_power();
}

EEBreakdown make_breakdown(std::vector<double> per_user_rate, double total_power, double bw) {
  EEBreakdown out;
  double s = 0.0;
  for (double r : per_user_rate) s += r;
  out.sum_rate = bw * s;
  out.total_power = total_power;
  out.ee = out.sum_rate / total_power;
  out.per_user_rate = std::move(per_user_rate);
  return out;
}

EEBreakdown energy_efficiency(const ChannelSet& cs, const PrecodingMatrix& b,
                              const PowerModel& pm, double bw) {
  return make_breakdown(rate_upper(cs, b), total_power(pm, b), bw);
}

namespace {

// Largest entry modulus; the power of b / m cannot overflow.
double max_abs(const CMatrix& b) {
  double m = 0.0;
  for (const auto& z : b.values()) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace

PrecodingMatrix project_power(const PrecodingMatrix& b, double p_max) {
  if (!(p_max > 0)) throw ContractError("project_power: p_max must be positive");
  if (!b.all_finite()) throw NumericError("project_power: non-finite precoder");
  const double p = transmit_power(b);
  if (p <= p_max) return b;
  double scale = std::sqrt(p_max / p);
  if (!std::isfinite(p)) {
    // Finite entries whose power overflows.
    const double m = max_abs(b);
    scale = std::sqrt(p_max / transmit_power(cplx(1.0 / m) * b)) / m;
  }
  PrecodingMatrix out = b;
  for (;;) {
    for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] = scale * b.values()[i];
    if (transmit_power(out) <= p_max) return out;
    scale = std::nextafter(scale, 0.0);
  }
}

CMatrix project_power_backward(const PrecodingMatrix& x, double p_max, const CMatrix& grad_y) {
  double p = transmit_power(x);
  if (p <= p_max) return grad_y;
  // y = x sqrt(P) / n with n = ||x||; x is pre-scaled by its largest entry
  // when the power overflows.
  double m = 1.0;
  if (!std::isfinite(p)) {
    m = max_abs(x);
    p = transmit_power(cplx(1.0 / m) * x);
  }
  const double inv_m = 1.0 / m;
  double re_dot = 0.0;
  for (std::size_t i = 0; i < x.values().size(); ++i) {
    re_dot += std::real(std::conj(x.values()[i] * inv_m) * grad_y.values()[i]);
  }
  const double a = std::sqrt(p_max / p) * inv_m;
  CMatrix g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.values().size(); ++i) {
    g.values()[i] = a * (grad_y.values()[i] - x.values()[i] * inv_m * (re_dot / p));
  }
  return g;
}

EEGradient energy_efficiency_grad(const ChannelSet& cs, const PrecodingMatrix& b,
                                  const PowerModel& pm, double bw) {
  check_shape(cs, b);
  const std::size_t K = b.cols(), n = b.rows();
  const CMatrix s = projections(cs, b);
  const double ptot = total_power(pm, b);
  double rate_sum = 0.0;
  // gs(k, l): gradient of sum_k R_k with respect to s(k, l).
  CMatrix gs(K, K);
  for (std::size_t k = 0; k < K; ++k) {
    const double g = cs.users[k].gamma;
    // Same accumulation order as sinr_upper, so the value matches rate_upper.
    double signal = 0.0, interference = 0.0;
    for (std::size_t l = 0; l < K; ++l) {
      const double p = g * std::norm(s(k, l));
      if (l == k) {
        signal = p;
      } else {
        interference += p;
      }
    }
    const double interf = interference + cs.n0;
    const double total = interf + signal;
    rate_sum += rate_from_sinr(signal / interf);
    const double c = 2.0 * g / std::numbers::ln2;
    for (std::size_t l = 0; l < K; ++l) {
      gs(k, l) = c * s(k, l) / total;
      if (l != k) gs(k, l) -= c * s(k, l) / interf;
    }
  }
  EEGradient out;
  out.ee = bw * rate_sum / ptot;
  out.grad = CMatrix(n, K);
  const double rate_scale = bw / ptot;
  const double power_scale = 2.0 * pm.xi * out.ee / ptot;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t l = 0; l < K; ++l) {
      cplx acc{};
      for (std::size_t k = 0; k < K; ++k) acc += cs.users[k].v[r] * gs(k, l);
      out.grad(r, l) = rate_scale * acc - power_scale * b(r, l);
    }
  }
  return out;
}

CMatrix effective_channel(const ChannelSet& cs) {
  CMatrix h(cs.n_antennas(), cs.n_users());
  for (std::size_t k = 0; k < cs.n_users(); ++k) {
    const double a = std::sqrt(cs.users[k].gamma);
    for (std::size_t r = 0; r < h.rows(); ++r) h(r, k) = a * cs.users[k].v[r];
  }
  return h;
}

CMatrix permute_rows(const CMatrix& m, std::span<const std::size_t> perm) {
  if (perm.size() != m.rows()) throw ShapeError("row permutation length mismatch");
  CMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto src = m.row(perm[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

CMatrix permute_cols(const CMatrix& m, std::span<const std::size_t> perm) {
  if (perm.size() != m.cols()) throw ShapeError("column permutation length mismatch");
  CMatrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t j = 0; j < perm.size(); ++j) out(r, j) = m(r, perm[j]);
  }
  return out;
}

ChannelSet permute_antennas(const ChannelSet& cs, std::span<const std::size_t> perm) {
  if (perm.size() != cs.n_antennas()) throw ShapeError("antenna permutation length mismatch");
  ChannelSet out = cs;
  for (auto& u : out.users) {
    CVector v(u.v.size());
    for (std::size_t i = 0; i < perm.size(); ++i) v[i] = u.v[perm[i]];
    u.v = std::move(v);
  }
  return out;
}

ChannelSet permute_users(const ChannelSet& cs, std::span<const std::size_t> perm) {
  if (perm.size() != cs.n_users()) throw ShapeError("user permutation length mismatch");
  ChannelSet out = cs;
  for (std::size_t j = 0; j < perm.size(); ++j) out.users[j] = cs.users[perm[j]];
  return out;
}

}  // namespace leo
