#include "leo/baseline_precoders.hpp"

#include <cmath>

#include "leo/errors.hpp"

namespace leo {

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::mf: return "mf";
    case BaselineKind::rzf: return "rzf";
    case BaselineKind::mmse: return "mmse";
  }
  return "?";
}

BaselineKind baseline_kind_from_string(std::string_view name) {
  if (name == "mf") return BaselineKind::mf;
  if (name == "rzf") return BaselineKind::rzf;
  if (name == "mmse") return BaselineKind::mmse;
  throw ConfigError("unknown baseline '" + std::string(name) + "'");
}

PrecodingMatrix precode_baseline(const CMatrix& h, const BaselineSpec& spec, double p_max,
                                 double n0) {
  if (!(p_max > 0)) throw ContractError("precode_baseline: p_max must be positive");
  if (!h.all_finite()) throw NumericError("precode_baseline: channel has non-finite entries");
  const std::size_t K = h.cols();
  PrecodingMatrix b;
  if (spec.kind == BaselineKind::mf) {
    b = h;
  } else {
    const double alpha = spec.kind == BaselineKind::mmse
                             ? static_cast<double>(K) * n0 / p_max
                             : spec.regularization;
    if (!(alpha > 0)) throw ContractError("precode_baseline: regularization must be positive");
    CMatrix gram = matmul(hermitian(h), h);
    for (std::size_t i = 0; i < K; ++i) gram(i, i) += alpha;
    const Cholesky chol(gram);
    // Columns of (H^H H + alpha I)^{-1}.
    CMatrix inv(K, K);
    for (std::size_t k = 0; k < K; ++k) {
      CVector e(K);
      e[k] = 1.0;
      inv.set_col(k, chol.solve(e));
    }
    b = matmul(h, inv);
  }
  const double p = transmit_power(b);
  if (!(p > 0)) return b;
  b *= std::sqrt(p_max / p);
  return project_power(b, p_max);
}

BaselineEvaluation evaluate_baseline(const ChannelSet& cs, const BaselineSpec& spec,
                                     const PowerModel& pm, double bw, double p_max,
                                     std::size_t n_draws, Seed seed, const FadingSpec& fading) {
  return evaluate_baseline(cs, cs, spec, pm, bw, p_max, n_draws, seed, fading);
}

BaselineEvaluation evaluate_baseline(const ChannelSet& truth, const ChannelSet& design,
                                     const BaselineSpec& spec, const PowerModel& pm, double bw,
                                     double p_max, std::size_t n_draws, Seed seed,
                                     const FadingSpec& fading) {
  if (n_draws == 0) throw ContractError("evaluate_baseline: n_draws must be >= 1");
  if (truth.n_users() != design.n_users() || truth.n_antennas() != design.n_antennas()) {
    throw ShapeError("evaluate_baseline: design and truth channel shapes differ");
  }
  const std::size_t K = truth.n_users();
  const bool same = &truth == &design;
  double rate = 0.0, power = 0.0, bound = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const Seed s = split_seed(seed, i);
    const auto draw = draw_fast_fading(truth, fading, s);
    const auto b = same ? precode_baseline(draw.channel_matrix(), spec, p_max, truth.n0)
                        : precode_baseline(draw_fast_fading(design, fading, s).channel_matrix(),
                                           spec, p_max, design.n0);
    for (std::size_t k = 0; k < K; ++k) {
      rate += rate_from_sinr(sinr_instant(draw, truth.n0, b, k));
    }
    power += total_power(pm, b);
    bound += energy_efficiency(truth, b, pm, bw).ee;
  }
  const double n = static_cast<double>(n_draws);
  BaselineEvaluation out;
  out.n_draws = n_draws;
  out.sum_rate = bw * rate / n;
  out.power = power / n;
  out.ee_mc = out.sum_rate / out.power;
  out.ee_bound = bound / n;
  return out;
}

}  // namespace leo
