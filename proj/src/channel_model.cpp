#include "leo/channel_model.hpp"

#include <cmath>
#include <fstream>

#include "leo/errors.hpp"
#include "leo/json_io.hpp"

namespace leo {

CMatrix FastFadingDraw::channel_matrix() const {
  return CMatrix::from_columns(h);
}

double noise_power_for_snr(double reference_power, double gamma_mean, std::size_t n_users,
                           double snr_db) {
  return reference_power * gamma_mean /
         (static_cast<double>(n_users) * std::pow(10.0, snr_db / 10.0));
}

CVector steering_vector(const ArrayGeometry& geom, double theta_x, double theta_y) {
  const std::size_t n = geom.n_antennas();
  CVector v(n);
  const double kx = 2.0 * std::numbers::pi * geom.spacing * std::sin(theta_x);
  const double ky = 2.0 * std::numbers::pi * geom.spacing * std::sin(theta_y);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t p = 0; p < geom.nx; ++p) {
    for (std::size_t q = 0; q < geom.ny; ++q) {
      const double phase = kx * static_cast<double>(p) + ky * static_cast<double>(q);
      v[p * geom.ny + q] = scale * cplx(std::cos(phase), std::sin(phase));
    }
  }
  return v;
}

ChannelSet draw_channel_set(const ArrayGeometry& geom, std::size_t n_users, Seed seed,
                            const ChannelDistributionSpec& dist) {
  ChannelSet cs;
  cs.geometry = geom;
  cs.seed = seed;
  cs.n0 = noise_power_for_snr(dist.reference_power, dist.gamma.mean(), n_users, dist.snr_db);
  cs.users.reserve(n_users);
  auto engine = make_engine(seed);
  std::uniform_real_distribution<double> angle(dist.angle_min, dist.angle_max);
  std::uniform_real_distribution<double> gain(dist.gamma.lo, dist.gamma.hi);
  for (std::size_t k = 0; k < n_users; ++k) {
    UserChannelStat u;
    u.theta_x = angle(engine);
    u.theta_y = angle(engine);
    u.gamma = dist.gamma.kind == GammaSpec::Kind::constant ? dist.gamma.value : gain(engine);
    u.v = steering_vector(geom, u.theta_x, u.theta_y);
    cs.users.push_back(std::move(u));
  }
  return cs;
}

FastFadingDraw draw_fast_fading(const ChannelSet& cs, const FadingSpec& fading, Seed seed) {
  const std::size_t paths = fading.paths_per_user == 0 ? 1 : fading.paths_per_user;
  FastFadingDraw draw;
  draw.g.reserve(cs.n_users());
  draw.h.reserve(cs.n_users());
  auto engine = make_engine(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (const auto& user : cs.users) {
    const double alpha = std::sqrt(user.gamma / static_cast<double>(paths));
    cplx g{};
    for (std::size_t l = 0; l < paths; ++l) {
      const double phi = fading.random_phase ? phase(engine) : 0.0;
      g += alpha * cplx(std::cos(phi), std::sin(phi));
    }
    CVector h(user.v.size());
    for (std::size_t n = 0; n < h.size(); ++n) h[n] = g * user.v[n];
    draw.g.push_back(g);
    draw.h.push_back(std::move(h));
  }
  return draw;
}

FastFadingDraw draw_fast_fading(const ChannelSet& cs, std::size_t paths_per_user, Seed seed) {
  return draw_fast_fading(cs, FadingSpec{paths_per_user, true}, seed);
}

CVector draw_csi_error(std::size_t n_antennas, double error_db, Engine& engine) {
  const double power = std::pow(10.0, error_db / 10.0);
  const double n = static_cast<double>(n_antennas);
  // Per-component variance power / N_t, split evenly over real and imaginary.
  std::normal_distribution<double> noise(0.0, std::sqrt(power / (2.0 * n)));
  CVector e(n_antennas);
  for (auto& z : e) z = cplx(noise(engine), noise(engine));
  return e;
}

ChannelSet perturb_csi(const ChannelSet& cs, double error_db, Seed seed) {
  if (std::isinf(error_db) && error_db < 0) return cs;
  ChannelSet out = cs;
  auto engine = make_engine(seed);
  for (auto& user : out.users) {
    const auto e = draw_csi_error(user.v.size(), error_db, engine);
    for (std::size_t i = 0; i < e.size(); ++i) user.v[i] += e[i];
    const double len = norm(user.v);
    for (auto& z : user.v) z /= len;
  }
  return out;
}

ChannelDataset generate_dataset(const ArrayGeometry& geom, std::size_t n_users,
                                const ChannelDistributionSpec& dist, Seed base_seed,
                                std::size_t count) {
  ChannelDataset ds{geom, n_users, dist, base_seed, {}};
  ds.draws.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ds.draws.push_back(draw_channel_set(geom, n_users, split_seed(base_seed, i), dist));
  }
  return ds;
}

void save_dataset(const std::string& path, const ChannelDataset& ds) {
  Json j;
  j["format"] = kChannelFormatMagic;
  j["version"] = 1;
  j["geometry"] = ds.geometry;
  j["n_users"] = ds.n_users;
  j["distribution"] = ds.distribution;
  j["base_seed"] = ds.base_seed;
  Json draws = Json::array();
  for (const auto& cs : ds.draws) draws.push_back(cs);
  j["draws"] = std::move(draws);
  write_json_file(path, j);
}

ChannelDataset load_dataset(const std::string& path) {
  const Json j = read_json_file(path);
  if (!j.contains("format") || j["format"] != kChannelFormatMagic) {
    throw IoError(path + ": not a " + std::string(kChannelFormatMagic) + " channel dataset");
  }
  ChannelDataset ds;
  ds.geometry = j.at("geometry").get<ArrayGeometry>();
  ds.n_users = j.at("n_users").get<std::size_t>();
  ds.distribution = j.at("distribution").get<ChannelDistributionSpec>();
  ds.base_seed = j.at("base_seed").get<Seed>();
  for (const auto& d : j.at("draws")) ds.draws.push_back(d.get<ChannelSet>());
  return ds;
}

// ---- JSON bindings -------------------------------------------------------

void to_json(Json& j, const ArrayGeometry& g) {
  j = Json{{"nx", g.nx}, {"ny", g.ny}, {"spacing", g.spacing}};
}

void from_json(const Json& j, ArrayGeometry& g) {
  g.nx = j.value("nx", g.nx);
  g.ny = j.value("ny", g.ny);
  g.spacing = j.value("spacing", g.spacing);
}

void to_json(Json& j, const GammaSpec& g) {
  if (g.kind == GammaSpec::Kind::constant) {
    j = Json{{"kind", "constant"}, {"value", g.value}};
  } else {
    j = Json{{"kind", "uniform"}, {"lo", g.lo}, {"hi", g.hi}};
  }
}

void from_json(const Json& j, GammaSpec& g) {
  const std::string kind = j.value("kind", std::string("constant"));
  if (kind == "constant") {
    g.kind = GammaSpec::Kind::constant;
  } else if (kind == "uniform") {
    g.kind = GammaSpec::Kind::uniform;
  } else {
    throw ConfigError("unknown gamma kind '" + kind + "'");
  }
  g.value = j.value("value", g.value);
  g.lo = j.value("lo", g.lo);
  g.hi = j.value("hi", g.hi);
}

void to_json(Json& j, const FadingSpec& f) {
  j = Json{{"paths_per_user", f.paths_per_user}, {"random_phase", f.random_phase}};
}

void from_json(const Json& j, FadingSpec& f) {
  f.paths_per_user = j.value("paths_per_user", f.paths_per_user);
  f.random_phase = j.value("random_phase", f.random_phase);
}

void to_json(Json& j, const ChannelDistributionSpec& d) {
  j = Json{{"angle_min", d.angle_min},     {"angle_max", d.angle_max},
           {"gamma", d.gamma},             {"snr_db", d.snr_db},
           {"reference_power", d.reference_power}, {"fading", d.fading}};
}

void from_json(const Json& j, ChannelDistributionSpec& d) {
  d.angle_min = j.value("angle_min", d.angle_min);
  d.angle_max = j.value("angle_max", d.angle_max);
  if (j.contains("gamma")) d.gamma = j["gamma"].get<GammaSpec>();
  d.snr_db = j.value("snr_db", d.snr_db);
  d.reference_power = j.value("reference_power", d.reference_power);
  if (j.contains("fading")) d.fading = j["fading"].get<FadingSpec>();
}

void to_json(Json& j, const ChannelSet& cs) {
  Json users = Json::array();
  for (const auto& u : cs.users) {
    users.push_back(Json{{"theta_x", u.theta_x},
                         {"theta_y", u.theta_y},
                         {"gamma", u.gamma},
                         {"v", complex_to_json(u.v.values())}});
  }
  j = Json{{"geometry", cs.geometry}, {"n0", cs.n0}, {"seed", cs.seed}, {"users", users}};
}

void from_json(const Json& j, ChannelSet& cs) {
  cs.geometry = j.at("geometry").get<ArrayGeometry>();
  cs.n0 = j.at("n0").get<double>();
  cs.seed = j.at("seed").get<Seed>();
  cs.users.clear();
  for (const auto& u : j.at("users")) {
    UserChannelStat s;
    s.theta_x = u.at("theta_x").get<double>();
    s.theta_y = u.at("theta_y").get<double>();
    s.gamma = u.at("gamma").get<double>();
    s.v = CVector(complex_from_json(u.at("v")));
    cs.users.push_back(std::move(s));
  }
}

Json complex_to_json(std::span<const cplx> values) {
  Json re = Json::array(), im = Json::array();
  for (const auto& z : values) {
    re.push_back(z.real());
    im.push_back(z.imag());
  }
  return Json{{"re", std::move(re)}, {"im", std::move(im)}};
}

std::vector<cplx> complex_from_json(const Json& j) {
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (re.size() != im.size()) throw IoError("complex array: re/im length mismatch");
  std::vector<cplx> out(re.size());
  for (std::size_t i = 0; i < re.size(); ++i) {
    out[i] = cplx(re[i].get<double>(), im[i].get<double>());
  }
  return out;
}

Json real_to_json(double x) {
  if (std::isinf(x)) return x > 0 ? Json("inf") : Json("-inf");
  return Json(x);
}

double real_from_json(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace leo
