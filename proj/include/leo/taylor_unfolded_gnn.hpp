#pragma once

#include <cstddef>
#include <string>
#include <optional>
#include <vector>

#include "leo/complex_linalg.hpp"
#include "leo/json_io.hpp"
#include "leo/system_model.hpp"
#include "leo/wmmse_dinkelbach.hpp"

namespace leo {

/// Pointwise activation for the unfolded edge update.
struct Activation {
  enum class Kind { identity, leaky_relu };
  Kind kind = Kind::identity;
  double slope = 0.01;  // leaky_relu only; applied to Re and Im separately

  bool operator==(const Activation&) const = default;
};

struct LayerParams {
  double c0 = 0.0, c1 = 0.0;
  double s0 = 0.0, s1 = 0.0;
  double d0 = 0.0, d1 = 0.0;

  bool operator==(const LayerParams&) const = default;
};

inline constexpr std::size_t kParamsPerLayer = 6;

struct UnfoldedParams {
  std::vector<LayerParams> layers;
  Activation activation;

  std::size_t n_layers() const noexcept { return layers.size(); }
  std::size_t size() const noexcept { return kParamsPerLayer * layers.size(); }

  /// c = [2, -1], s = d = 0, identity activation: every layer is one
  /// Newton-Schulz step f <- 2f - f M f.
  static UnfoldedParams exact_taylor(std::size_t n_layers);
  static UnfoldedParams zeros(std::size_t n_layers);

  /// Layer-major flattening (c0, c1, s0, s1, d0, d1) per layer.
  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);

  bool operator==(const UnfoldedParams&) const = default;
};

/// Diagonal matrix of 1 / m(i, i). Throws NumericError when |m(i, i)| < 1e-300.
CMatrix diag_inverse_init(const CMatrix& m);

/// 2 f - f p f.
CMatrix taylor_step_exact(const CMatrix& f_prev, const CMatrix& p);

/// Gershgorin bound max_i sum_j |m(i, j)| / |m(i, i)| on the spectrum of D^{-1} m.
double gershgorin_scaled_bound(const CMatrix& m);

/// Scale applied to diag_inverse_init so that ||I - f0 m|| < 1 holds for HPD m.
double safe_init_gain(const CMatrix& m);

struct UnfoldLayerTape {
  CMatrix f;  // input to the layer
  CMatrix t;  // M f
  CMatrix h;  // f t
  CMatrix z;  // pre-activation
};

/// m = a a^H + ridge I, lets t = m f cost O(N^2 K) instead of O(N^3).
struct GramFactor {
  CMatrix a;  // N x K
  double ridge = 0.0;
};

struct UnfoldTape {
  CMatrix m;
  std::optional<GramFactor> factor;
  double init_gain = 1.0;
  std::vector<UnfoldLayerTape> layers;
};

struct UnfoldResult {
  CMatrix f;  // approximation of m^{-1}
  UnfoldTape tape;
};

/// L-layer edge update approximating m^{-1}:
///   f0 = init_gain * diag_inverse_init(m)
///   t = m f, h = f t,
///   z_ij = c0 f_ij + c1 h_ij + (s0 + s1 t_jj) mean_{a != i} f_aj
///        + d0 mean_{b != j} f_ib + d1 mean_{b != j} h_ib,
/// where mean over the n - 1 neighbors is zero when n = 1.
///   f' = act(z).
/// When factor is given it must describe m; t is then formed from it.
UnfoldResult unfold_forward(const CMatrix& m, const UnfoldedParams& params,
                            double init_gain = 1.0, const GramFactor* factor = nullptr);

/// Forward pass without recording the tape.
CMatrix unfold_apply(const CMatrix& m, const UnfoldedParams& params, double init_gain = 1.0,
                     const GramFactor* factor = nullptr);

/// Recomputes the output from a tape (for replay checks).
CMatrix unfold_replay(const UnfoldTape& tape, const UnfoldedParams& params);

/// dL/dparams (flattened like UnfoldedParams::flatten) given dL/df_L in the
/// convention g = dL/dRe + i dL/dIm. m is treated as a constant.
std::vector<double> unfold_backward(const UnfoldTape& tape, const UnfoldedParams& params,
                                    const CMatrix& output_grad);

/// Everything the unfolded b-update computes, kept for truncated backprop.
struct UnfoldedBUpdate {
  CMatrix m;                // G + mu I
  double ridge = 0.0;       // mu
  double init_gain = 1.0;
  std::vector<cplx> coef;   // w_k sqrt(gamma_k) conj(u_k)
  UnfoldResult unfold;
  PrecodingMatrix b_raw;    // coef_k F(M) v_k
  PrecodingMatrix b;        // projected
};

/// The b-update with the exact solve replaced by F(M). The ridge is
/// mu = max(rho xi ln2 / bw, N_0 sum_k w_k |u_k|^2 / p_max).
UnfoldedBUpdate unfolded_b_update(const ChannelSet& cs, const std::vector<cplx>& u,
                                  const std::vector<double>& w, double rho,
                                  const PowerModel& pm, double bw, double p_max,
                                  const UnfoldedParams& params);

/// Dinkelbach + WMMSE with every b-update done by the unfolded network.
DinkelbachResult precode_unfolded(const ChannelSet& cs, const PowerModel& pm, double bw,
                                  double p_max, const UnfoldedParams& params,
                                  const DinkelbachOptions& opts = {});

/// Checkpoint I/O (JSON, arch "taylor_unfolded").
Json unfolded_to_json(const UnfoldedParams& params);
UnfoldedParams unfolded_from_json(const Json& j);

}  // namespace leo
