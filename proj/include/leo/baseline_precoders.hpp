#pragma once

#include <string>
#include <string_view>

#include "leo/channel_model.hpp"
#include "leo/system_model.hpp"

namespace leo {

enum class BaselineKind { mf, rzf, mmse };

std::string_view to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(std::string_view name);

struct BaselineSpec {
  BaselineKind kind = BaselineKind::mf;
  double regularization = 0.01;  // alpha for RZF (near zero forcing); MMSE derives its own
};

/// Instantaneous-CSI linear precoder from an N_t x K channel matrix h.
///
///   MF:   B = H
///   RZF:  B = H (H^H H + alpha I)^{-1}
///   MMSE: RZF with alpha = K N_0 / p_max
///
/// The result is scaled so that sum ||b_k||^2 == p_max (one common factor).
PrecodingMatrix precode_baseline(const CMatrix& h, const BaselineSpec& spec, double p_max,
                                 double n0);

struct BaselineEvaluation {
  double ee_mc = 0.0;     // bits/J from averaged instantaneous rates
  double ee_bound = 0.0;  // mean of the statistical bound over the same precoders
  double sum_rate = 0.0;  // bits/s, MC
  double power = 0.0;     // W, mean total consumption
  std::size_t n_draws = 0;
};

/// Averages a baseline over n_draws fast-fading realizations of `cs`.
/// Draw i uses seed split_seed(seed, i); precoder and SINR both see h_i.
BaselineEvaluation evaluate_baseline(const ChannelSet& cs, const BaselineSpec& spec,
                                     const PowerModel& pm, double bw, double p_max,
                                     std::size_t n_draws, Seed seed,
                                     const FadingSpec& fading = {});

/// Mismatched-CSI variant: draw i realizes the same gains g_i on both sets;
/// the precoder is built from g_i v_hat (design) and scored on g_i v (truth).
BaselineEvaluation evaluate_baseline(const ChannelSet& truth, const ChannelSet& design,
                                     const BaselineSpec& spec, const PowerModel& pm, double bw,
                                     double p_max, std::size_t n_draws, Seed seed,
                                     const FadingSpec& fading = {});

}  // namespace leo
