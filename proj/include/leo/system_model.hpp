#pragma once

#include <cstddef>
#include <vector>

#include "leo/channel_model.hpp"
#include "leo/complex_linalg.hpp"

namespace leo {

/// N_t x K matrix; column k is the precoding vector b_k.
using PrecodingMatrix = CMatrix;

/// Transmitter power consumption: xi * sum ||b_k||^2 + P_t with
/// P_t = n_t * p_rfc + p_lo + p_bb.
struct PowerModel {
  double xi = 2.0;
  double p_rfc = 0.3;
  double p_lo = 0.1;
  double p_bb = 0.2;
  std::size_t n_t = 1;

  double static_power() const noexcept {
    return static_cast<double>(n_t) * p_rfc + p_lo + p_bb;
  }
};

/// Everything that defines one physical operating point.
struct SystemConfig {
  ArrayGeometry geometry{4, 4, 0.5};
  std::size_t n_users = 4;
  double bandwidth = 20e6;  // Hz
  double xi = 2.0;
  double p_rfc = 0.3;
  double p_lo = 0.1;
  double p_bb = 0.2;
  double p_max = 10.0;  // W
  ChannelDistributionSpec distribution;

  PowerModel power_model() const noexcept {
    return {xi, p_rfc, p_lo, p_bb, geometry.n_antennas()};
  }
  /// Channel prior with the SNR reference tied to p_max.
  ChannelDistributionSpec channel_distribution() const {
    auto d = distribution;
    d.reference_power = p_max;
    return d;
  }
};

struct EEBreakdown {
  double sum_rate = 0.0;     // bits/s
  double total_power = 0.0;  // W
  double ee = 0.0;           // bits/J
  std::vector<double> per_user_rate;  // bits/s/Hz
};

/// Total transmit power sum_k ||b_k||^2.
double transmit_power(const PrecodingMatrix& b);

/// gamma_k |v_k^H b_k|^2 / (sum_{l != k} gamma_k |v_k^H b_l|^2 + N_0).
double sinr_upper(const ChannelSet& cs, const PrecodingMatrix& b, std::size_t k);

/// log2(1 + sinr), through log1p so tiny SINRs keep their value.
double rate_from_sinr(double sinr);

/// log2(1 + sinr_upper(k)) per user.
std::vector<double> rate_upper(const ChannelSet& cs, const PrecodingMatrix& b);

/// Instantaneous SINR of user k under the realized channels of `draw`.
double sinr_instant(const FastFadingDraw& draw, double n0, const PrecodingMatrix& b,
                    std::size_t k);

struct RateEstimate {
  std::vector<double> mean;    // bits/s/Hz
  std::vector<double> std_error;  // of the mean
  std::size_t n_samples = 0;
};

/// Sample mean of log2(1 + SINR_k) over n_samples fast-fading draws; draw i
/// uses seed split_seed(seed, i).
RateEstimate rate_ergodic_mc(const ChannelSet& cs, const PrecodingMatrix& b,
                             std::size_t n_samples, Seed seed, const FadingSpec& fading = {});

double total_power(const PowerModel& pm, const PrecodingMatrix& b);

/// EE = bw * sum_k rate_upper_k / total_power.
EEBreakdown energy_efficiency(const ChannelSet& cs, const PrecodingMatrix& b,
                              const PowerModel& pm, double bw);

/// Builds a breakdown from given per-user rates (bits/s/Hz) and power.
EEBreakdown make_breakdown(std::vector<double> per_user_rate, double total_power, double bw);

/// Returns b when feasible, otherwise b scaled onto sum ||b_k||^2 = p_max.
/// Idempotent: the scale is nudged down until the result is feasible.
PrecodingMatrix project_power(const PrecodingMatrix& b, double p_max);

/// Reverse pass of project_power at input x: maps dL/dy to dL/dx.
/// Gradients use the convention g = dL/dRe + i dL/dIm.
CMatrix project_power_backward(const PrecodingMatrix& x, double p_max, const CMatrix& grad_y);

/// EE value and its gradient with respect to b (same convention).
struct EEGradient {
  double ee = 0.0;
  CMatrix grad;
};
EEGradient energy_efficiency_grad(const ChannelSet& cs, const PrecodingMatrix& b,
                                  const PowerModel& pm, double bw);

/// sqrt(gamma_k) v_k as columns: the effective statistical channel.
CMatrix effective_channel(const ChannelSet& cs);

/// Rows of b reordered so that output row i is input row perm[i].
CMatrix permute_rows(const CMatrix& m, std::span<const std::size_t> perm);
CMatrix permute_cols(const CMatrix& m, std::span<const std::size_t> perm);

/// Applies the same antenna permutation to every user direction.
ChannelSet permute_antennas(const ChannelSet& cs, std::span<const std::size_t> perm);
ChannelSet permute_users(const ChannelSet& cs, std::span<const std::size_t> perm);

}  // namespace leo
