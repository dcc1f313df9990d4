#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "leo/channel_model.hpp"
#include "leo/system_model.hpp"

namespace leo {

/// Receivers u_k = conj(sqrt(gamma_k) v_k^H b_k) / (sum_i gamma_k |v_k^H b_i|^2 + N_0).
std::vector<cplx> update_u(const ChannelSet& cs, const PrecodingMatrix& b);

/// Per-user MSE e_k = |u_k sqrt(gamma_k) v_k^H b_k - 1|^2
///                    + sum_{i != k} gamma_k |u_k v_k^H b_i|^2 + N_0 |u_k|^2.
std::vector<double> mse(const ChannelSet& cs, const PrecodingMatrix& b,
                        const std::vector<cplx>& u);

/// Weights w_k = 1 / e_k.
std::vector<double> update_w(const ChannelSet& cs, const PrecodingMatrix& b,
                             const std::vector<cplx>& u);

/// Weighted Gram G = sum_k w_k |u_k|^2 gamma_k v_k v_k^H.
CMatrix weighted_gram(const ChannelSet& cs, const std::vector<cplx>& u,
                      const std::vector<double>& w);

/// Per-user scalar w_k sqrt(gamma_k) conj(u_k) multiplying the solve in the b-update.
std::vector<cplx> update_coefficients(const ChannelSet& cs, const std::vector<cplx>& u,
                                      const std::vector<double>& w);

struct BUpdateInfo {
  double multiplier = 0.0;  // a >= 0 on the power constraint
  double ridge = 0.0;       // (rho xi + a) / (bw / ln 2)
  std::size_t bisection_steps = 0;
};

/// Exact minimizer of the weighted-MSE surrogate over b:
///   b_k = w_k sqrt(gamma_k) conj(u_k) (G + mu I)^{-1} v_k,
///   mu = (rho xi + a) ln 2 / bw,
/// with a found by bisection so that a = 0 and power <= p_max, or a > 0 and
/// power == p_max (1e-8 relative).
PrecodingMatrix update_b(const ChannelSet& cs, const std::vector<cplx>& u,
                         const std::vector<double>& w, double rho, const PowerModel& pm,
                         double bw, double p_max, BUpdateInfo* info = nullptr);

/// Dinkelbach subproblem value bw * sum_k R_k(b) - rho * P_total(b).
double subproblem_objective(const ChannelSet& cs, const PrecodingMatrix& b, double rho,
                            const PowerModel& pm, double bw);

/// A b-update rule: (cs, u, w, rho) -> b. The exact rule is update_b.
using BUpdateFn = std::function<PrecodingMatrix(const ChannelSet&, const std::vector<cplx>&,
                                                const std::vector<double>&, double)>;

struct WmmseOptions {
  double eps2 = 1e-5;
  std::size_t max_iterations = 500;
};

struct WmmseIterate {
  double objective = 0.0;  // subproblem objective after the sweep
  double sum_log_w = 0.0;
};

struct WmmseResult {
  PrecodingMatrix b;
  std::vector<WmmseIterate> trace;
  std::size_t iterations = 0;
  bool converged = false;
  // State that produced b in the last sweep.
  std::vector<cplx> last_u;
  std::vector<double> last_w;
};

/// Block coordinate descent u -> w -> b until |sum log w - sum log w'| < eps2.
WmmseResult wmmse_solve(const ChannelSet& cs, double rho, const PrecodingMatrix& init_b,
                        const PowerModel& pm, double bw, double p_max,
                        const WmmseOptions& opts = {});
WmmseResult wmmse_solve(const ChannelSet& cs, double rho, const PrecodingMatrix& init_b,
                        const PowerModel& pm, double bw, double p_max,
                        const WmmseOptions& opts, const BUpdateFn& b_update);

struct DinkelbachState {
  double rho = 0.0;      // bits/J
  std::size_t iteration = 0;
  double f_value = 0.0;  // F(rho_n) per Hz of bandwidth
  std::size_t inner_iterations = 0;
  bool inner_converged = false;
};

struct DinkelbachOptions {
  double eps1 = 1e-5;  // on F / bw
  double eps2 = 1e-5;
  std::size_t max_outer = 100;
  std::size_t max_inner = 500;
};

struct DinkelbachResult {
  PrecodingMatrix b;
  std::vector<DinkelbachState> trace;
  std::vector<std::vector<WmmseIterate>> inner_traces;
  bool converged = false;
  double ee = 0.0;
  // Context of the final b-update: b == rule(cs, last_u, last_w, last_rho).
  std::vector<cplx> last_u;
  std::vector<double> last_w;
  double last_rho = 0.0;
};

/// Initial point with ||b_k||^2 = p_max / K along each user's direction.
PrecodingMatrix initial_precoder(const ChannelSet& cs, double p_max);

/// Dinkelbach iteration rho_{n+1} = EE(b_n) with WMMSE subproblems, starting
/// from rho_0 = 0 and warm-starting b across subproblems.
DinkelbachResult dinkelbach_solve(const ChannelSet& cs, const PowerModel& pm, double bw,
                                  double p_max, const DinkelbachOptions& opts = {});
DinkelbachResult dinkelbach_solve(const ChannelSet& cs, const PowerModel& pm, double bw,
                                  double p_max, const DinkelbachOptions& opts,
                                  const BUpdateFn& b_update);

}  // namespace leo
