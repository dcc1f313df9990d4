#pragma once

#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "leo/complex_linalg.hpp"
#include "leo/rng.hpp"

namespace leo {

/// Uniform planar array of nx * ny elements. Element (p, q) is stored at
/// index p * ny + q.
struct ArrayGeometry {
  std::size_t nx = 1;
  std::size_t ny = 1;
  double spacing = 0.5;  // wavelengths

  std::size_t n_antennas() const noexcept { return nx * ny; }
  bool operator==(const ArrayGeometry&) const = default;
};

/// Statistical CSI of one user: unit-norm direction and mean gain power.
struct UserChannelStat {
  CVector v;
  double gamma = 1.0;
  double theta_x = 0.0;
  double theta_y = 0.0;

  bool operator==(const UserChannelStat&) const = default;
};

/// One draw of the system's randomness: K users on a shared array.
struct ChannelSet {
  ArrayGeometry geometry;
  std::vector<UserChannelStat> users;
  double n0 = 1.0;
  Seed seed = 0;

  std::size_t n_users() const noexcept { return users.size(); }
  std::size_t n_antennas() const noexcept { return geometry.n_antennas(); }

  bool operator==(const ChannelSet&) const = default;
};

/// Instantaneous channel realization drawn around a ChannelSet.
struct FastFadingDraw {
  std::vector<cplx> g;     // per-user channel gain
  std::vector<CVector> h;  // per-user channel vector, h_k = g_k v_k

  /// N_t x K matrix whose k-th column is h_k.
  CMatrix channel_matrix() const;
};

struct GammaSpec {
  enum class Kind { constant, uniform };
  Kind kind = Kind::constant;
  double value = 1.0;  // constant
  double lo = 0.5;     // uniform
  double hi = 1.5;

  double mean() const noexcept { return kind == Kind::constant ? value : 0.5 * (lo + hi); }
  bool operator==(const GammaSpec&) const = default;
};

struct FadingSpec {
  std::size_t paths_per_user = 3;
  bool random_phase = true;  // false: every path phase fixed at 0

  bool operator==(const FadingSpec&) const = default;
};

/// Declared priors for channel draws. Nothing here is inferred from data.
struct ChannelDistributionSpec {
  double angle_min = -std::numbers::pi / 3.0;
  double angle_max = std::numbers::pi / 3.0;
  GammaSpec gamma;
  double snr_db = 0.0;
  double reference_power = 10.0;  // P_max used in the SNR convention
  FadingSpec fading;

  bool operator==(const ChannelDistributionSpec&) const = default;
};

/// N_0 = P_ref * gamma_mean / (K * 10^(snr_db / 10)).
double noise_power_for_snr(double reference_power, double gamma_mean, std::size_t n_users,
                           double snr_db);

/// Separable UPA response with element phase
/// 2 pi spacing (p sin(theta_x) + q sin(theta_y)), scaled to unit norm.
CVector steering_vector(const ArrayGeometry& geom, double theta_x, double theta_y);

/// K users with i.i.d. angles and gains from `dist`; deterministic in `seed`.
ChannelSet draw_channel_set(const ArrayGeometry& geom, std::size_t n_users, Seed seed,
                            const ChannelDistributionSpec& dist = {});

/// g_k = sum_l alpha_l exp(j phi_l) with alpha_l^2 = gamma_k / L; h_k = g_k v_k.
FastFadingDraw draw_fast_fading(const ChannelSet& cs, const FadingSpec& fading, Seed seed);
FastFadingDraw draw_fast_fading(const ChannelSet& cs, std::size_t paths_per_user, Seed seed);

/// Sentinel meaning "no estimation error" for perturb_csi.
inline constexpr double kNoCsiError = -std::numeric_limits<double>::infinity();

/// e ~ CN(0, 10^(error_db/10) I / N_t); the estimation-error draw behind perturb_csi.
CVector draw_csi_error(std::size_t n_antennas, double error_db, Engine& engine);

/// Replaces every v_k by normalize(v_k + e_k), e_k ~ CN(0, 10^(error_db/10) I / N_t).
ChannelSet perturb_csi(const ChannelSet& cs, double error_db, Seed seed);

/// A persisted collection of channel draws sharing one configuration.
struct ChannelDataset {
  ArrayGeometry geometry;
  std::size_t n_users = 0;
  ChannelDistributionSpec distribution;
  Seed base_seed = 0;
  std::vector<ChannelSet> draws;
};

/// Draws `count` channel sets with seeds split_seed(base_seed, i).
ChannelDataset generate_dataset(const ArrayGeometry& geom, std::size_t n_users,
                                const ChannelDistributionSpec& dist, Seed base_seed,
                                std::size_t count);

inline constexpr const char* kChannelFormatMagic = "LEOCH1";

/// JSON file tagged with format "LEOCH1". Throws IoError on failure.
void save_dataset(const std::string& path, const ChannelDataset& ds);
ChannelDataset load_dataset(const std::string& path);

}  // namespace leo
