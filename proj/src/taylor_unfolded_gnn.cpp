#include "leo/taylor_unfolded_gnn.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "leo/errors.hpp"

namespace leo {

namespace {

double act(double x, const Activation& a) {
  return (a.kind == Activation::Kind::identity || x > 0) ? x : a.slope * x;
}

double act_grad(double x, const Activation& a) {
  return (a.kind == Activation::Kind::identity || x > 0) ? 1.0 : a.slope;
}

std::vector<cplx> col_sums(const CMatrix& m) {
  std::vector<cplx> s(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) s[j] += row[j];
  }
  return s;
}

std::vector<cplx> row_sums(const CMatrix& m) {
  std::vector<cplx> s(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (const auto& z : m.row(i)) s[i] += z;
  }
  return s;
}

// Neighbor sums are averaged over the n - 1 other nodes.
double neighbor_scale(std::size_t n) { return n > 1 ? 1.0 / static_cast<double>(n - 1) : 0.0; }

// m f, through the factor when available.
CMatrix apply_m(const CMatrix& m, const GramFactor* factor, const CMatrix& f) {
  if (!factor) return matmul(m, f);
  CMatrix t = matmul(factor->a, matmul(hermitian(factor->a), f));
  const auto fv = f.values();
  auto tv = t.values();
  for (std::size_t i = 0; i < tv.size(); ++i) tv[i] += factor->ridge * fv[i];
  return t;
}

// One layer; fills the tape entry when given.
CMatrix layer_forward(const CMatrix& m, const GramFactor* factor, const CMatrix& f,
                      const LayerParams& p, const Activation& activation, std::size_t index,
                      UnfoldLayerTape* tape) {
  const std::size_t n = f.rows();
  CMatrix t = apply_m(m, factor, f);
  CMatrix h = matmul(f, t);
  const auto cf = col_sums(f);
  const auto rf = row_sums(f);
  const auto rh = row_sums(h);
  const double a = neighbor_scale(n);
  CMatrix z(n, n);
  CMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const cplx fij = f(i, j), hij = h(i, j);
      const cplx s_bar = a * (p.s0 + p.s1 * t(j, j));
      const cplx zij = p.c0 * fij + p.c1 * hij + s_bar * (cf[j] - fij) +
                       a * p.d0 * (rf[i] - fij) + a * p.d1 * (rh[i] - hij);
      z(i, j) = zij;
      const cplx y(act(zij.real(), activation), act(zij.imag(), activation));
      if (!std::isfinite(y.real()) || !std::isfinite(y.imag())) {
        throw NumericError("unfold_forward: non-finite activation at layer " +
                           std::to_string(index));
      }
      out(i, j) = y;
    }
  }
  if (tape) *tape = UnfoldLayerTape{f, std::move(t), std::move(h), std::move(z)};
  return out;
}

CMatrix initial_f(const CMatrix& m, double init_gain) {
  CMatrix f = diag_inverse_init(m);
  if (init_gain != 1.0) f *= init_gain;
  return f;
}

void check_square(const CMatrix& m, const char* what) {
  if (!m.square()) throw ShapeError(std::string(what) + ": matrix must be square");
}

void check_factor(const CMatrix& m, const GramFactor* factor, const char* what) {
  if (factor && factor->a.rows() != m.rows()) {
    throw ShapeError(std::string(what) + ": factor rows do not match matrix");
  }
}

}  // namespace

UnfoldedParams UnfoldedParams::exact_taylor(std::size_t n_layers) {
  UnfoldedParams p;
  p.layers.assign(n_layers, LayerParams{2.0, -1.0, 0.0, 0.0, 0.0, 0.0});
  return p;
}

UnfoldedParams UnfoldedParams::zeros(std::size_t n_layers) {
  UnfoldedParams p;
  p.layers.assign(n_layers, LayerParams{});
  return p;
}

std::vector<double> UnfoldedParams::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& l : layers) out.insert(out.end(), {l.c0, l.c1, l.s0, l.s1, l.d0, l.d1});
  return out;
}

void UnfoldedParams::assign(const std::vector<double>& flat) {
  if (flat.size() != size()) {
    throw ContractError("UnfoldedParams::assign: expected " + std::to_string(size()) +
                        " values, got " + std::to_string(flat.size()));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const double* p = flat.data() + kParamsPerLayer * l;
    layers[l] = LayerParams{p[0], p[1], p[2], p[3], p[4], p[5]};
  }
}

CMatrix diag_inverse_init(const CMatrix& m) {
  check_square(m, "diag_inverse_init");
  CMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (std::abs(m(i, i)) < 1e-300) {
      throw NumericError("diag_inverse_init: zero diagonal entry at index " + std::to_string(i));
    }
    out(i, i) = 1.0 / m(i, i);
  }
  return out;
}

CMatrix taylor_step_exact(const CMatrix& f_prev, const CMatrix& p) {
  if (f_prev.rows() != p.rows() || f_prev.cols() != p.cols()) {
    throw ShapeError("taylor_step_exact: shape mismatch");
  }
  CMatrix out = f_prev;
  out *= 2.0;
  out -= matmul(f_prev, matmul(p, f_prev));
  return out;
}

double gershgorin_scaled_bound(const CMatrix& m) {
  check_square(m, "gershgorin_scaled_bound");
  double bound = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (const auto& z : m.row(i)) s += std::abs(z);
    bound = std::max(bound, s / std::abs(m(i, i)));
  }
  return bound;
}

double safe_init_gain(const CMatrix& m) {
  return std::min(1.0, 2.0 / (1.05 * gershgorin_scaled_bound(m)));
}

UnfoldResult unfold_forward(const CMatrix& m, const UnfoldedParams& params, double init_gain,
                            const GramFactor* factor) {
  check_square(m, "unfold_forward");
  check_factor(m, factor, "unfold_forward");
  if (params.layers.empty()) throw ContractError("unfold_forward: at least one layer required");
  UnfoldResult out;
  out.tape.m = m;
  if (factor) out.tape.factor = *factor;
  out.tape.init_gain = init_gain;
  out.tape.layers.resize(params.layers.size());
  CMatrix f = initial_f(m, init_gain);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    f = layer_forward(m, factor, f, params.layers[l], params.activation, l, &out.tape.layers[l]);
  }
  out.f = std::move(f);
  return out;
}

CMatrix unfold_apply(const CMatrix& m, const UnfoldedParams& params, double init_gain,
                     const GramFactor* factor) {
  check_square(m, "unfold_apply");
  check_factor(m, factor, "unfold_apply");
  if (params.layers.empty()) throw ContractError("unfold_apply: at least one layer required");
  CMatrix f = initial_f(m, init_gain);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    f = layer_forward(m, factor, f, params.layers[l], params.activation, l, nullptr);
  }
  return f;
}

CMatrix unfold_replay(const UnfoldTape& tape, const UnfoldedParams& params) {
  if (tape.layers.size() != params.layers.size()) {
    throw ContractError("unfold_replay: tape has " + std::to_string(tape.layers.size()) +
                        " layers, params have " + std::to_string(params.layers.size()));
  }
  CMatrix f = initial_f(tape.m, tape.init_gain);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    f = layer_forward(tape.m, tape.factor ? &*tape.factor : nullptr, f, params.layers[l],
                      params.activation, l, nullptr);
  }
  return f;
}

std::vector<double> unfold_backward(const UnfoldTape& tape, const UnfoldedParams& params,
                                    const CMatrix& output_grad) {
  const std::size_t L = params.layers.size();
  if (tape.layers.size() != L) {
    throw ContractError("unfold_backward: tape has " + std::to_string(tape.layers.size()) +
                        " layers, params have " + std::to_string(L));
  }
  const std::size_t n = tape.m.rows();
  if (output_grad.rows() != n || output_grad.cols() != n) {
    throw ContractError("unfold_backward: output gradient shape does not match tape");
  }
  std::vector<double> grads(kParamsPerLayer * L, 0.0);
  const CMatrix m_h = hermitian(tape.m);
  CMatrix g = output_grad;
  for (std::size_t l = L; l-- > 0;) {
    const auto& lt = tape.layers[l];
    const auto& p = params.layers[l];
    const CMatrix& f = lt.f;
    const CMatrix& t = lt.t;
    const CMatrix& h = lt.h;

    CMatrix gz(n, n);
    for (std::size_t i = 0; i < n * n; ++i) {
      const cplx zi = lt.z.values()[i];
      const cplx gi = g.values()[i];
      gz.values()[i] = cplx(gi.real() * act_grad(zi.real(), params.activation),
                            gi.imag() * act_grad(zi.imag(), params.activation));
    }
    const auto cf = col_sums(f);
    const auto rf = row_sums(f);
    const auto rh = row_sums(h);
    const auto gc = col_sums(gz);
    const auto gr = row_sums(gz);
    const double a = neighbor_scale(n);

    double gc0 = 0, gc1 = 0, gs0 = 0, gs1 = 0, gd0 = 0, gd1 = 0;
    CMatrix gf(n, n), gh(n, n), gt(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const cplx gzij = gz(i, j);
        const cplx cz = std::conj(gzij);
        const cplx fc = cf[j] - f(i, j);
        gc0 += std::real(cz * f(i, j));
        gc1 += std::real(cz * h(i, j));
        gs0 += a * std::real(cz * fc);
        gs1 += a * std::real(cz * t(j, j) * fc);
        gd0 += a * std::real(cz * (rf[i] - f(i, j)));
        gd1 += a * std::real(cz * (rh[i] - h(i, j)));

        const cplx s_bar_c = a * std::conj(p.s0 + p.s1 * t(j, j));
        gf(i, j) += p.c0 * gzij + s_bar_c * (gc[j] - gzij) + a * p.d0 * (gr[i] - gzij);
        gh(i, j) += p.c1 * gzij + a * p.d1 * (gr[i] - gzij);
        gt(j, j) += a * p.s1 * std::conj(fc) * gzij;
      }
    }
    double* out = grads.data() + kParamsPerLayer * l;
    out[0] = gc0;
    out[1] = gc1;
    out[2] = gs0;
    out[3] = gs1;
    out[4] = gd0;
    out[5] = gd1;

    if (l == 0) break;  // f0 depends only on m
    // h = f t
    gf += matmul(gh, hermitian(t));
    gt += matmul(hermitian(f), gh);
    // t = m f
    gf += matmul(m_h, gt);
    g = std::move(gf);
  }
  return grads;
}

UnfoldedBUpdate unfolded_b_update(const ChannelSet& cs, const std::vector<cplx>& u,
                                  const std::vector<double>& w, double rho,
                                  const PowerModel& pm, double bw, double p_max,
                                  const UnfoldedParams& params) {
  const std::size_t K = cs.n_users();
  if (u.size() != K || w.size() != K) throw ShapeError("unfolded_b_update: u/w length mismatch");
  UnfoldedBUpdate out;
  const double c = bw / std::numbers::ln2;
  double weight = 0.0;
  for (std::size_t k = 0; k < K; ++k) weight += w[k] * std::norm(u[k]);
  out.ridge = std::max(rho * pm.xi / c, cs.n0 * weight / p_max);
  out.m = weighted_gram(cs, u, w);
  GramFactor factor{CMatrix(cs.n_antennas(), K), 0.0};
  for (std::size_t k = 0; k < K; ++k) {
    const double s = std::sqrt(w[k] * std::norm(u[k]) * cs.users[k].gamma);
    for (std::size_t i = 0; i < cs.n_antennas(); ++i) factor.a(i, k) = s * cs.users[k].v[i];
  }
  if (!(out.ridge > 0)) {
    double tr = 0.0;
    for (std::size_t i = 0; i < out.m.rows(); ++i) tr += out.m(i, i).real();
    out.ridge = std::max(1e-12 * tr / static_cast<double>(out.m.rows()), 1e-300);
  }
  for (std::size_t i = 0; i < out.m.rows(); ++i) out.m(i, i) += out.ridge;
  factor.ridge = out.ridge;
  out.init_gain = safe_init_gain(out.m);
  out.coef = update_coefficients(cs, u, w);
  out.unfold = unfold_forward(out.m, params, out.init_gain, &factor);
  out.b_raw = PrecodingMatrix(cs.n_antennas(), K);
  for (std::size_t k = 0; k < K; ++k) {
    CVector x = matvec(out.unfold.f, cs.users[k].v);
    for (auto& z : x) z *= out.coef[k];
    out.b_raw.set_col(k, x);
  }
  if (!out.b_raw.all_finite()) throw NumericError("unfolded_b_update: non-finite precoder");
  out.b = project_power(out.b_raw, p_max);
  return out;
}

DinkelbachResult precode_unfolded(const ChannelSet& cs, const PowerModel& pm, double bw,
                                  double p_max, const UnfoldedParams& params,
                                  const DinkelbachOptions& opts) {
  const BUpdateFn rule = [&](const ChannelSet& c, const std::vector<cplx>& u,
                             const std::vector<double>& w, double r) {
    return unfolded_b_update(c, u, w, r, pm, bw, p_max, params).b;
  };
  return dinkelbach_solve(cs, pm, bw, p_max, opts, rule);
}

Json unfolded_to_json(const UnfoldedParams& params) {
  Json layers = Json::array();
  for (const auto& l : params.layers) {
    layers.push_back(Json{{"c0", l.c0}, {"c1", l.c1}, {"s0", l.s0},
                          {"s1", l.s1}, {"d0", l.d0}, {"d1", l.d1}});
  }
  Json act{{"kind", params.activation.kind == Activation::Kind::identity ? "identity"
                                                                         : "leaky_relu"},
           {"slope", params.activation.slope}};
  return Json{{"arch", "taylor_unfolded"},
              {"version", 1},
              {"n_layers", params.layers.size()},
              {"t_definition", "t = M f, recomputed every layer"},
              {"neighbor_aggregation", "mean"},
              {"activation", act},
              {"layers", layers}};
}

UnfoldedParams unfolded_from_json(const Json& j) {
  if (j.value("arch", std::string()) != "taylor_unfolded") {
    throw IoError("checkpoint is not a taylor_unfolded model");
  }
  if (j.value("neighbor_aggregation", std::string("mean")) != "mean") {
    throw IoError("unsupported neighbor aggregation in checkpoint");
  }
  UnfoldedParams p;
  for (const auto& l : j.at("layers")) {
    p.layers.push_back(LayerParams{l.at("c0").get<double>(), l.at("c1").get<double>(),
                                   l.at("s0").get<double>(), l.at("s1").get<double>(),
                                   l.at("d0").get<double>(), l.at("d1").get<double>()});
  }
  if (p.layers.size() != j.at("n_layers").get<std::size_t>()) {
    throw IoError("checkpoint layer count mismatch");
  }
  const auto& a = j.at("activation");
  const auto kind = a.at("kind").get<std::string>();
  if (kind == "identity") {
    p.activation.kind = Activation::Kind::identity;
  } else if (kind == "leaky_relu") {
    p.activation.kind = Activation::Kind::leaky_relu;
  } else {
    throw IoError("unknown activation '" + kind + "'");
  }
  p.activation.slope = a.value("slope", 0.01);
  return p;
}

}  // namespace leo
