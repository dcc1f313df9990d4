#include "leo/wmmse_dinkelbach.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "leo/errors.hpp"

namespace leo {

namespace {

// s(k, l) = v_k^H b_l
CMatrix user_projections(const ChannelSet& cs, const PrecodingMatrix& b) {
  const std::size_t K = cs.n_users();
  if (b.rows() != cs.n_antennas() || b.cols() != K) {
    throw ShapeError("precoder shape does not match channel set");
  }
  CMatrix s(K, K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& v = cs.users[k].v;
    for (std::size_t r = 0; r < b.rows(); ++r) {
      const cplx vc = std::conj(v[r]);
      const auto row = b.row(r);
      for (std::size_t l = 0; l < K; ++l) s(k, l) += vc * row[l];
    }
  }
  return s;
}

double sum_log(const std::vector<double>& w) {
  double s = 0.0;
  for (double x : w) s += std::log(x);
  return s;
}

struct RidgeSolve {
  PrecodingMatrix b;
  double power;
};

RidgeSolve solve_ridge(const ChannelSet& cs, const CMatrix& gram,
                       const std::vector<cplx>& coef, double mu) {
  CMatrix m = gram;
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += mu;
  const Cholesky chol(m);
  RidgeSolve out{PrecodingMatrix(cs.n_antennas(), cs.n_users()), 0.0};
  for (std::size_t k = 0; k < cs.n_users(); ++k) {
    CVector x = chol.solve(cs.users[k].v);
    for (auto& z : x) z *= coef[k];
    out.power += norm_squared(x);
    out.b.set_col(k, x);
  }
  return out;
}

}  // namespace

std::vector<cplx> update_u(const ChannelSet& cs, const PrecodingMatrix& b) {
  const CMatrix s = user_projections(cs, b);
  const std::size_t K = cs.n_users();
  std::vector<cplx> u(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double g = cs.users[k].gamma;
    double denom = cs.n0;
    for (std::size_t i = 0; i < K; ++i) denom += g * std::norm(s(k, i));
    u[k] = std::conj(std::sqrt(g) * s(k, k)) / denom;
  }
  return u;
}

std::vector<double> mse(const ChannelSet& cs, const PrecodingMatrix& b,
                        const std::vector<cplx>& u) {
  const CMatrix s = user_projections(cs, b);
  const std::size_t K = cs.n_users();
  if (u.size() != K) throw ShapeError("receiver count does not match users");
  std::vector<double> e(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double g = cs.users[k].gamma;
    double acc = std::norm(u[k] * std::sqrt(g) * s(k, k) - 1.0);
    for (std::size_t i = 0; i < K; ++i) {
      if (i != k) acc += g * std::norm(u[k] * s(k, i));
    }
    e[k] = acc + cs.n0 * std::norm(u[k]);
  }
  return e;
}

std::vector<double> update_w(const ChannelSet& cs, const PrecodingMatrix& b,
                             const std::vector<cplx>& u) {
  auto e = mse(cs, b, u);
  for (auto& x : e) {
    if (!(x > 0)) throw NumericError("update_w: non-positive MSE");
    x = 1.0 / x;
  }
  return e;
}

CMatrix weighted_gram(const ChannelSet& cs, const std::vector<cplx>& u,
                      const std::vector<double>& w) {
  const std::size_t n = cs.n_antennas();
  CMatrix g(n, n);
  for (std::size_t k = 0; k < cs.n_users(); ++k) {
    const double a = w[k] * std::norm(u[k]) * cs.users[k].gamma;
    if (a == 0.0) continue;
    const auto& v = cs.users[k].v;
    for (std::size_t i = 0; i < n; ++i) {
      const cplx vi = a * v[i];
      auto row = g.row(i);
      for (std::size_t j = 0; j < n; ++j) row[j] += vi * std::conj(v[j]);
    }
  }
  return g;
}

std::vector<cplx> update_coefficients(const ChannelSet& cs, const std::vector<cplx>& u,
                                      const std::vector<double>& w) {
  std::vector<cplx> c(cs.n_users());
  for (std::size_t k = 0; k < c.size(); ++k) {
    c[k] = w[k] * std::sqrt(cs.users[k].gamma) * std::conj(u[k]);
  }
  return c;
}

PrecodingMatrix update_b(const ChannelSet& cs, const std::vector<cplx>& u,
                         const std::vector<double>& w, double rho, const PowerModel& pm,
                         double bw, double p_max, BUpdateInfo* info) {
  if (rho < 0) throw ContractError("update_b: rho must be non-negative");
  const std::size_t K = cs.n_users();
  if (u.size() != K || w.size() != K) throw ShapeError("update_b: u/w length mismatch");
  const double c = bw / std::numbers::ln2;
  const CMatrix gram = weighted_gram(cs, u, w);
  const auto coef = update_coefficients(cs, u, w);

  double scale = 0.0;
  for (std::size_t i = 0; i < gram.rows(); ++i) scale += gram(i, i).real();
  scale = std::max(scale / static_cast<double>(gram.rows()), 1e-300);
  const double mu_free = std::max(rho * pm.xi / c, 1e-12 * scale);

  BUpdateInfo local;
  auto finish = [&](RidgeSolve r, double mu) {
    local.ridge = mu;
    local.multiplier = std::max(0.0, mu * c - rho * pm.xi);
    if (info) *info = local;
    return project_power(r.b, p_max);
  };

  RidgeSolve lo_sol = solve_ridge(cs, gram, coef, mu_free);
  if (lo_sol.power <= p_max) {
    local.ridge = mu_free;
    if (info) *info = local;
    return lo_sol.b;
  }

  // ||(G + mu I)^{-1} v_k|| <= 1 / mu bounds the power from above.
  double coef_energy = 0.0;
  for (const auto& a : coef) coef_energy += std::norm(a);
  double lo = mu_free;
  double hi = std::max(std::sqrt(coef_energy / p_max) * (1.0 + 1e-12), lo * 2.0);
  RidgeSolve hi_sol = solve_ridge(cs, gram, coef, hi);
  while (hi_sol.power > p_max) {
    lo = hi;
    hi *= 2.0;
    hi_sol = solve_ridge(cs, gram, coef, hi);
    if (++local.bisection_steps > 200) throw NumericError("update_b: bracket search failed");
  }
  for (;;) {
    if (p_max - hi_sol.power <= 1e-12 * p_max || hi / lo - 1.0 <= 1e-15) break;
    if (++local.bisection_steps > 200) {
      throw NumericError("update_b: multiplier bisection did not converge in 200 steps");
    }
    const double mid = std::sqrt(lo * hi);
    RidgeSolve mid_sol = solve_ridge(cs, gram, coef, mid);
    if (mid_sol.power > p_max) {
      lo = mid;
    } else {
      hi = mid;
      hi_sol = std::move(mid_sol);
    }
  }
  return finish(std::move(hi_sol), hi);
}

double subproblem_objective(const ChannelSet& cs, const PrecodingMatrix& b, double rho,
                            const PowerModel& pm, double bw) {
  double r = 0.0;
  for (double x : rate_upper(cs, b)) r += x;
  return bw * r - rho * total_power(pm, b);
}

WmmseResult wmmse_solve(const ChannelSet& cs, double rho, const PrecodingMatrix& init_b,
                        const PowerModel& pm, double bw, double p_max,
                        const WmmseOptions& opts) {
  const BUpdateFn exact = [&](const ChannelSet& c, const std::vector<cplx>& u,
                              const std::vector<double>& w, double r) {
    return update_b(c, u, w, r, pm, bw, p_max);
  };
  return wmmse_solve(cs, rho, init_b, pm, bw, p_max, opts, exact);
}

WmmseResult wmmse_solve(const ChannelSet& cs, double rho, const PrecodingMatrix& init_b,
                        const PowerModel& pm, double bw, double p_max,
                        const WmmseOptions& opts, const BUpdateFn& b_update) {
  if (!(opts.eps2 > 0)) throw ContractError("wmmse_solve: eps2 must be positive");
  if (transmit_power(init_b) > p_max * (1.0 + 1e-9)) {
    throw ContractError("wmmse_solve: initial precoder is infeasible");
  }
  WmmseResult out;
  out.b = init_b;
  auto u = update_u(cs, out.b);
  auto w = update_w(cs, out.b, u);
  double slog = sum_log(w);
  out.trace.push_back({subproblem_objective(cs, out.b, rho, pm, bw), slog});
  while (out.iterations < opts.max_iterations) {
    out.last_u = u;
    out.last_w = w;
    out.b = b_update(cs, u, w, rho);
    ++out.iterations;
    u = update_u(cs, out.b);
    w = update_w(cs, out.b, u);
    const double slog_next = sum_log(w);
    out.trace.push_back({subproblem_objective(cs, out.b, rho, pm, bw), slog_next});
    if (std::abs(slog_next - slog) < opts.eps2) {
      out.converged = true;
      break;
    }
    slog = slog_next;
  }
  if (out.iterations == 0) {
    out.last_u = std::move(u);
    out.last_w = std::move(w);
  }
  return out;
}

PrecodingMatrix initial_precoder(const ChannelSet& cs, double p_max) {
  const std::size_t K = cs.n_users();
  PrecodingMatrix b(cs.n_antennas(), K);
  const double a = std::sqrt(p_max / static_cast<double>(K));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t r = 0; r < b.rows(); ++r) b(r, k) = a * cs.users[k].v[r];
  }
  return project_power(b, p_max);
}

DinkelbachResult dinkelbach_solve(const ChannelSet& cs, const PowerModel& pm, double bw,
                                  double p_max, const DinkelbachOptions& opts) {
  const BUpdateFn exact = [&](const ChannelSet& c, const std::vector<cplx>& u,
                              const std::vector<double>& w, double r) {
    return update_b(c, u, w, r, pm, bw, p_max);
  };
  return dinkelbach_solve(cs, pm, bw, p_max, opts, exact);
}

DinkelbachResult dinkelbach_solve(const ChannelSet& cs, const PowerModel& pm, double bw,
                                  double p_max, const DinkelbachOptions& opts,
                                  const BUpdateFn& b_update) {
  if (!(opts.eps1 > 0)) throw ContractError("dinkelbach_solve: eps1 must be positive");
  if (!(bw > 0)) throw ContractError("dinkelbach_solve: bandwidth must be positive");
  DinkelbachResult out;
  out.b = initial_precoder(cs, p_max);
  double rho = 0.0;
  const WmmseOptions inner{opts.eps2, opts.max_inner};
  for (std::size_t n = 0; n < opts.max_outer; ++n) {
    auto sub = wmmse_solve(cs, rho, out.b, pm, bw, p_max, inner, b_update);
    out.b = std::move(sub.b);
    out.last_u = std::move(sub.last_u);
    out.last_w = std::move(sub.last_w);
    out.last_rho = rho;
    const double f = subproblem_objective(cs, out.b, rho, pm, bw) / bw;
    out.trace.push_back({rho, n, f, sub.iterations, sub.converged});
    out.inner_traces.push_back(std::move(sub.trace));
    if (f <= opts.eps1) {
      out.converged = true;
      break;
    }
    rho = energy_efficiency(cs, out.b, pm, bw).ee;
  }
  out.ee = energy_efficiency(cs, out.b, pm, bw).ee;
  return out;
}

}  // namespace leo
