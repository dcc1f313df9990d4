#include "leo/end_to_end_gnn.hpp"

#include <cmath>
#include <string>

#include "leo/errors.hpp"

namespace leo {

namespace {

using Vec = std::vector<double>;

// y[e] = W x[e] + b for every row e.
void dense_forward(const double* w, const double* b, const Vec& x, std::size_t rows,
                   std::size_t in, std::size_t out, Vec& y, std::size_t* macs) {
  y.assign(rows * out, 0.0);
  for (std::size_t e = 0; e < rows; ++e) {
    const double* xe = x.data() + e * in;
    double* ye = y.data() + e * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w + o * in;
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xe[i];
      ye[o] = acc;
    }
  }
  if (macs) *macs += rows * in * out;
}

// Accumulates weight/bias gradients; returns dL/dx when want_dx.
void dense_backward(const double* w, const Vec& x, const Vec& gy, std::size_t rows,
                    std::size_t in, std::size_t out, double* gw, double* gb, Vec* gx) {
  if (gx) gx->assign(rows * in, 0.0);
  for (std::size_t e = 0; e < rows; ++e) {
    const double* xe = x.data() + e * in;
    const double* ge = gy.data() + e * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = ge[o];
      if (g == 0.0) continue;
      gb[o] += g;
      double* gwo = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) gwo[i] += g * xe[i];
      if (gx) {
        const double* wo = w + o * in;
        double* gxe = gx->data() + e * in;
        for (std::size_t i = 0; i < in; ++i) gxe[i] += g * wo[i];
      }
    }
  }
}

Vec relu(const Vec& v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0 ? v[i] : 0.0;
  return out;
}

void mlp_forward(const Vec& params, const E2EModel::MlpRef& r, const Vec& x, std::size_t rows,
                 Vec& hidden_pre, Vec& y, std::size_t* macs) {
  dense_forward(params.data() + r.first.weight, params.data() + r.first.bias, x, rows,
                r.first.in, r.first.out, hidden_pre, macs);
  dense_forward(params.data() + r.second.weight, params.data() + r.second.bias,
                relu(hidden_pre), rows, r.second.in, r.second.out, y, macs);
}

void mlp_backward(const Vec& params, const E2EModel::MlpRef& r, const Vec& x,
                  const Vec& hidden_pre, const Vec& gy, std::size_t rows, Vec& grads, Vec* gx) {
  const Vec hidden = relu(hidden_pre);
  Vec gh;
  dense_backward(params.data() + r.second.weight, hidden, gy, rows, r.second.in, r.second.out,
                 grads.data() + r.second.weight, grads.data() + r.second.bias, &gh);
  for (std::size_t i = 0; i < gh.size(); ++i) {
    if (!(hidden_pre[i] > 0)) gh[i] = 0.0;
  }
  dense_backward(params.data() + r.first.weight, x, gh, rows, r.first.in, r.first.out,
                 grads.data() + r.first.weight, grads.data() + r.first.bias, gx);
}

// out[n, k] = scale * sum over the other edges sharing k (by_user) or n.
Vec exclusive_sum(const Vec& m, std::size_t n_ant, std::size_t n_users, std::size_t width,
                  bool along_antennas, Aggregation agg) {
  Vec out(m.size(), 0.0);
  if (along_antennas) {
    const double scale =
        agg == Aggregation::mean ? (n_ant > 1 ? 1.0 / static_cast<double>(n_ant - 1) : 0.0)
                                 : 1.0;
    for (std::size_t k = 0; k < n_users; ++k) {
      Vec total(width, 0.0);
      for (std::size_t n = 0; n < n_ant; ++n) {
        const double* src = m.data() + (n * n_users + k) * width;
        for (std::size_t c = 0; c < width; ++c) total[c] += src[c];
      }
      for (std::size_t n = 0; n < n_ant; ++n) {
        const std::size_t e = (n * n_users + k) * width;
        for (std::size_t c = 0; c < width; ++c) out[e + c] = scale * (total[c] - m[e + c]);
      }
    }
  } else {
    const double scale =
        agg == Aggregation::mean ? (n_users > 1 ? 1.0 / static_cast<double>(n_users - 1) : 0.0)
                                 : 1.0;
    for (std::size_t n = 0; n < n_ant; ++n) {
      Vec total(width, 0.0);
      for (std::size_t k = 0; k < n_users; ++k) {
        const double* src = m.data() + (n * n_users + k) * width;
        for (std::size_t c = 0; c < width; ++c) total[c] += src[c];
      }
      for (std::size_t k = 0; k < n_users; ++k) {
        const std::size_t e = (n * n_users + k) * width;
        for (std::size_t c = 0; c < width; ++c) out[e + c] = scale * (total[c] - m[e + c]);
      }
    }
  }
  return out;
}

}  // namespace

EdgeFeatures e2e_features(const ChannelSet& cs) {
  EdgeFeatures f;
  f.n_antennas = cs.n_antennas();
  f.n_users = cs.n_users();
  f.width = 2;
  f.values.resize(f.n_edges() * 2);
  for (std::size_t k = 0; k < f.n_users; ++k) {
    const double a = std::sqrt(cs.users[k].gamma);
    for (std::size_t n = 0; n < f.n_antennas; ++n) {
      const cplx z = a * cs.users[k].v[n];
      f.values[(n * f.n_users + k) * 2] = z.real();
      f.values[(n * f.n_users + k) * 2 + 1] = z.imag();
    }
  }
  return f;
}

E2EModel::E2EModel(E2EConfig config) : config_(config) {
  if (config_.n_layers == 0 || config_.edge_width == 0 || config_.mlp_hidden == 0) {
    throw ConfigError("E2EConfig: layers and widths must be positive");
  }
  std::size_t offset = 0;
  auto dense = [&](std::size_t in, std::size_t out) {
    DenseRef d{in, out, offset, offset + in * out};
    offset += in * out + out;
    return d;
  };
  const std::size_t H = config_.edge_width, M = config_.mlp_hidden;
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::size_t din = layer_in(l), dout = layer_out(l);
    for (std::size_t which = 0; which < 2; ++which) {
      MlpRef r;
      r.first = dense(din, M);
      r.second = dense(M, H);
      layout_.push_back(r);
    }
    MlpRef r3;
    r3.first = dense(din + H, M);
    r3.second = dense(M, dout);
    layout_.push_back(r3);
  }
  params_.assign(offset, 0.0);
}

std::size_t E2EModel::layer_in(std::size_t layer) const noexcept {
  return layer == 0 ? 2 : config_.edge_width;
}

std::size_t E2EModel::layer_out(std::size_t layer) const noexcept {
  return layer + 1 == config_.n_layers ? 2 : config_.edge_width;
}

E2EModel::MlpRef E2EModel::mlp(std::size_t layer, std::size_t which) const {
  if (layer >= config_.n_layers || which > 2) throw ContractError("E2EModel::mlp: out of range");
  return layout_[3 * layer + which];
}

E2EModel E2EModel::initialize(const E2EConfig& config, Seed seed) {
  E2EModel model(config);
  auto engine = make_engine(seed);
  auto fill = [&](const DenseRef& d, double gain) {
    const double bound = std::sqrt(gain / static_cast<double>(d.in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < d.in * d.out; ++i) model.params_[d.weight + i] = dist(engine);
  };
  for (const auto& r : model.layout_) {
    fill(r.first, 6.0);   // followed by ReLU
    fill(r.second, 3.0);
  }
  return model;
}

PrecodingMatrix e2e_forward(const E2EModel& model, const EdgeFeatures& features, double p_max,
                            E2ETape* tape, std::size_t* macs) {
  if (features.width != 2 || features.values.size() != features.n_edges() * 2) {
    throw ShapeError("e2e_forward: edge features must be (N_t * K) x 2");
  }
  const auto& cfg = model.config();
  const std::size_t N = features.n_antennas, K = features.n_users, E = features.n_edges();
  const std::size_t H = cfg.edge_width;
  const Vec& params = model.parameters();
  if (tape) {
    tape->n_antennas = N;
    tape->n_users = K;
    tape->p_max = p_max;
    tape->layers.assign(cfg.n_layers, {});
  }
  Vec a = features.values;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::size_t din = model.layer_in(l);
    E2ELayerTape lt;
    mlp_forward(params, model.mlp(l, 0), a, E, lt.h1, lt.m1, macs);
    mlp_forward(params, model.mlp(l, 1), a, E, lt.h2, lt.m2, macs);
    const Vec s1 = exclusive_sum(lt.m1, N, K, H, true, cfg.aggregation);
    const Vec s2 = exclusive_sum(lt.m2, N, K, H, false, cfg.aggregation);
    if (macs) *macs += 2 * E * H;
    lt.x3.resize(E * (din + H));
    for (std::size_t e = 0; e < E; ++e) {
      double* x = lt.x3.data() + e * (din + H);
      for (std::size_t c = 0; c < din; ++c) x[c] = a[e * din + c];
      for (std::size_t c = 0; c < H; ++c) x[din + c] = s1[e * H + c] + s2[e * H + c];
    }
    mlp_forward(params, model.mlp(l, 2), lt.x3, E, lt.h3, lt.y, macs);
    const bool last = l + 1 == cfg.n_layers;
    Vec next = last ? lt.y : relu(lt.y);
    for (double x : next) {
      if (!std::isfinite(x)) {
        throw NumericError("e2e_forward: non-finite activation at layer " + std::to_string(l));
      }
    }
    lt.a = std::move(a);
    a = std::move(next);
    if (tape) tape->layers[l] = std::move(lt);
  }
  PrecodingMatrix b(N, K);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t e = n * K + k;
      b(n, k) = cplx(a[2 * e], a[2 * e + 1]);
    }
  }
  if (tape) tape->b_raw = b;
  return project_power(b, p_max);
}

PrecodingMatrix e2e_forward(const E2EModel& model, const ChannelSet& cs, double p_max,
                            E2ETape* tape) {
  return e2e_forward(model, e2e_features(cs), p_max, tape);
}

std::vector<double> e2e_backward(const E2EModel& model, const E2ETape& tape,
                                 const CMatrix& grad_b) {
  const auto& cfg = model.config();
  const std::size_t N = tape.n_antennas, K = tape.n_users, E = N * K;
  const std::size_t H = cfg.edge_width;
  if (tape.layers.size() != cfg.n_layers) {
    throw ContractError("e2e_backward: tape depth does not match the model");
  }
  if (grad_b.rows() != N || grad_b.cols() != K) {
    throw ContractError("e2e_backward: gradient shape does not match tape");
  }
  const Vec& params = model.parameters();
  Vec grads(params.size(), 0.0);
  const CMatrix g_raw = project_power_backward(tape.b_raw, tape.p_max, grad_b);
  Vec g(E * 2);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t e = n * K + k;
      g[2 * e] = g_raw(n, k).real();
      g[2 * e + 1] = g_raw(n, k).imag();
    }
  }
  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const auto& lt = tape.layers[l];
    const std::size_t din = model.layer_in(l);
    const bool last = l + 1 == cfg.n_layers;
    if (!last) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(lt.y[i] > 0)) g[i] = 0.0;
      }
    }
    Vec gx3;
    mlp_backward(params, model.mlp(l, 2), lt.x3, lt.h3, g, E, grads, &gx3);
    Vec ga(E * din, 0.0), gd(E * H);
    for (std::size_t e = 0; e < E; ++e) {
      for (std::size_t c = 0; c < din; ++c) ga[e * din + c] = gx3[e * (din + H) + c];
      for (std::size_t c = 0; c < H; ++c) gd[e * H + c] = gx3[e * (din + H) + din + c];
    }
    // The exclusive-sum map is symmetric, so its adjoint is itself.
    const Vec gm1 = exclusive_sum(gd, N, K, H, true, cfg.aggregation);
    const Vec gm2 = exclusive_sum(gd, N, K, H, false, cfg.aggregation);
    Vec ga1, ga2;
    const bool need_dx = l > 0;
    mlp_backward(params, model.mlp(l, 0), lt.a, lt.h1, gm1, E, grads, need_dx ? &ga1 : nullptr);
    mlp_backward(params, model.mlp(l, 1), lt.a, lt.h2, gm2, E, grads, need_dx ? &ga2 : nullptr);
    if (!need_dx) break;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += ga1[i] + ga2[i];
    g = std::move(ga);
  }
  return grads;
}

Json e2e_to_json(const E2EModel& model) {
  const auto& c = model.config();
  return Json{{"arch", "end_to_end"},
              {"version", 1},
              {"n_layers", c.n_layers},
              {"edge_width", c.edge_width},
              {"mlp_hidden", c.mlp_hidden},
              {"aggregation", c.aggregation == Aggregation::sum ? "sum" : "mean"},
              {"parameters", model.parameters()}};
}

E2EModel e2e_from_json(const Json& j) {
  if (j.value("arch", std::string()) != "end_to_end") {
    throw IoError("checkpoint is not an end_to_end model");
  }
  E2EConfig c;
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.edge_width = j.at("edge_width").get<std::size_t>();
  c.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
  const auto agg = j.value("aggregation", std::string("sum"));
  if (agg == "sum") {
    c.aggregation = Aggregation::sum;
  } else if (agg == "mean") {
    c.aggregation = Aggregation::mean;
  } else {
    throw IoError("unknown aggregation '" + agg + "'");
  }
  E2EModel model(c);
  auto values = j.at("parameters").get<std::vector<double>>();
  if (values.size() != model.size()) throw IoError("checkpoint parameter count mismatch");
  model.parameters() = std::move(values);
  return model;
}

}  // namespace leo
