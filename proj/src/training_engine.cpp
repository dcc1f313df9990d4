#include "leo/training_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "leo/errors.hpp"
#include "leo/parallel.hpp"

namespace leo {

// ---- models --------------------------------------------------------------

UnfoldedModel::UnfoldedModel(UnfoldedParams params, DinkelbachOptions opts)
    : params_(std::move(params)), opts_(opts) {
  if (params_.layers.empty()) throw ConfigError("unfolded model needs at least one layer");
}

PrecodingMatrix UnfoldedModel::precode(const ChannelSet& cs, const SystemConfig& sys) const {
  return precode_unfolded(cs, sys.power_model(), sys.bandwidth, sys.p_max, params_, opts_).b;
}

double UnfoldedModel::ee_and_grad(const ChannelSet& cs, const SystemConfig& sys,
                                  std::vector<double>* grad) const {
  const auto pm = sys.power_model();
  const auto res = precode_unfolded(cs, pm, sys.bandwidth, sys.p_max, params_, opts_);
  if (!grad) return res.ee;
  const auto upd = unfolded_b_update(cs, res.last_u, res.last_w, res.last_rho, pm,
                                     sys.bandwidth, sys.p_max, params_);
  const auto eg = energy_efficiency_grad(cs, upd.b, pm, sys.bandwidth);
  const CMatrix g_raw = project_power_backward(upd.b_raw, sys.p_max, eg.grad);
  // b_k = coef_k F v_k  =>  dL/dF = sum_k conj(coef_k) g_k v_k^H
  const std::size_t n = cs.n_antennas();
  CMatrix g_f(n, n);
  for (std::size_t k = 0; k < cs.n_users(); ++k) {
    const cplx a = std::conj(upd.coef[k]);
    const auto& v = cs.users[k].v;
    for (std::size_t i = 0; i < n; ++i) {
      const cplx gi = a * g_raw(i, k);
      auto row = g_f.row(i);
      for (std::size_t j = 0; j < n; ++j) row[j] += gi * std::conj(v[j]);
    }
  }
  *grad = unfold_backward(upd.unfold.tape, params_, g_f);
  return eg.ee;
}

Json UnfoldedModel::to_json() const {
  Json j = unfolded_to_json(params_);
  j["solver"] = Json{{"eps1", opts_.eps1},
                     {"eps2", opts_.eps2},
                     {"max_outer", opts_.max_outer},
                     {"max_inner", opts_.max_inner}};
  return j;
}

std::unique_ptr<PrecoderModel> UnfoldedModel::clone() const {
  return std::make_unique<UnfoldedModel>(*this);
}

E2EGnnModel::E2EGnnModel(E2EModel model) : model_(std::move(model)) {}

void E2EGnnModel::set_parameters(const std::vector<double>& values) {
  if (values.size() != model_.size()) {
    throw ContractError("E2EGnnModel::set_parameters: expected " +
                        std::to_string(model_.size()) + " values");
  }
  model_.parameters() = values;
}

PrecodingMatrix E2EGnnModel::precode(const ChannelSet& cs, const SystemConfig& sys) const {
  return e2e_forward(model_, cs, sys.p_max);
}

double E2EGnnModel::ee_and_grad(const ChannelSet& cs, const SystemConfig& sys,
                                std::vector<double>* grad) const {
  const auto pm = sys.power_model();
  E2ETape tape;
  const auto b = e2e_forward(model_, cs, sys.p_max, grad ? &tape : nullptr);
  if (!grad) return energy_efficiency(cs, b, pm, sys.bandwidth).ee;
  const auto eg = energy_efficiency_grad(cs, b, pm, sys.bandwidth);
  *grad = e2e_backward(model_, tape, eg.grad);
  return eg.ee;
}

Json E2EGnnModel::to_json() const { return e2e_to_json(model_); }

std::unique_ptr<PrecoderModel> E2EGnnModel::clone() const {
  return std::make_unique<E2EGnnModel>(*this);
}

std::unique_ptr<PrecoderModel> model_from_json(const Json& j) {
  const auto arch = j.value("arch", std::string());
  if (arch == "taylor_unfolded") {
    DinkelbachOptions opts;
    if (j.contains("solver")) {
      const auto& s = j["solver"];
      opts.eps1 = s.value("eps1", opts.eps1);
      opts.eps2 = s.value("eps2", opts.eps2);
      opts.max_outer = s.value("max_outer", opts.max_outer);
      opts.max_inner = s.value("max_inner", opts.max_inner);
    }
    return std::make_unique<UnfoldedModel>(unfolded_from_json(j), opts);
  }
  if (arch == "end_to_end") return std::make_unique<E2EGnnModel>(e2e_from_json(j));
  throw IoError("unknown model architecture '" + arch + "'");
}

void save_checkpoint(const std::string& path, const PrecoderModel& model) {
  write_json_file(path, model.to_json());
}

std::unique_ptr<PrecoderModel> load_checkpoint(const std::string& path) {
  return model_from_json(read_json_file(path));
}

// ---- optimizer -----------------------------------------------------------

void AdamState::step(std::vector<double>& params, const std::vector<double>& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ContractError("AdamState::step: size mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double mh = m_[i] / bc1;
    const double vh = v_[i] / bc2;
    params[i] -= cfg_.learning_rate * mh / (std::sqrt(vh) + cfg_.epsilon);
  }
}

// ---- data and loss -------------------------------------------------------

DataSplit make_split(const SystemConfig& sys, Seed seed, std::size_t n_train,
                     std::size_t n_test) {
  const auto dist = sys.channel_distribution();
  DataSplit s;
  s.train = generate_dataset(sys.geometry, sys.n_users, dist, namespace_seed(seed, "train"),
                             n_train)
                .draws;
  s.test = generate_dataset(sys.geometry, sys.n_users, dist, namespace_seed(seed, "test"),
                            n_test)
               .draws;
  return s;
}

double batch_loss(const PrecoderModel& model, const std::vector<ChannelSet>& batch,
                  const SystemConfig& sys, std::size_t workers) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  std::vector<double> ee(batch.size());
  parallel_for(
      batch.size(), [&](std::size_t i) { ee[i] = model.ee_and_grad(batch[i], sys, nullptr); },
      workers);
  double s = 0.0;
  for (double x : ee) s += x;
  return -s / static_cast<double>(batch.size());
}

LossAndGrad batch_loss_and_grad(const PrecoderModel& model,
                                const std::vector<ChannelSet>& batch, const SystemConfig& sys,
                                std::size_t workers, long step) {
  if (batch.empty()) throw ContractError("batch_loss_and_grad: empty batch");
  const std::size_t D = batch.size();
  std::vector<double> ee(D);
  std::vector<std::vector<double>> grads(D);
  parallel_for(
      D,
      [&](std::size_t i) {
        try {
          ee[i] = model.ee_and_grad(batch[i], sys, &grads[i]);
        } catch (const NumericError& e) {
          throw TrainingError(std::string("non-finite forward pass: ") + e.what(), step,
                              batch[i].seed);
        }
      },
      workers);
  LossAndGrad out;
  out.grad.assign(grads.front().size(), 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < D; ++i) {
    bool finite = std::isfinite(ee[i]);
    for (double g : grads[i]) finite = finite && std::isfinite(g);
    if (!finite) {
      throw TrainingError("non-finite loss at step " + std::to_string(step), step,
                          batch[i].seed);
    }
    s += ee[i];
    for (std::size_t p = 0; p < out.grad.size(); ++p) out.grad[p] += grads[i][p];
  }
  const double inv = 1.0 / static_cast<double>(D);
  out.loss = -s * inv;
  for (auto& g : out.grad) g *= -inv;
  return out;
}

// ---- training loop -------------------------------------------------------

TrainResult train(PrecoderModel& model, const TrainConfig& cfg, const SystemConfig& sys,
                  const std::vector<ChannelSet>& train_set) {
  if (cfg.batch_size == 0 || cfg.epochs == 0) {
    throw ConfigError("train: batch_size and epochs must be >= 1");
  }
  if (train_set.empty()) throw ConfigError("train: empty training set");
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(cfg.validation_fraction * static_cast<double>(train_set.size())));
  if (n_val >= train_set.size()) n_val = 0;
  const std::size_t n_fit = train_set.size() - n_val;
  const std::vector<ChannelSet> validation(train_set.begin() + static_cast<long>(n_fit),
                                           train_set.end());

  TrainResult out;
  std::vector<double> params = model.parameters();
  AdamState adam(params.size(), cfg.adam);
  out.best_parameters = params;
  double best_val = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> order(n_fit);
  std::vector<ChannelSet> batch;
  batch.reserve(cfg.batch_size);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    auto engine = make_engine(split_seed(namespace_seed(cfg.seed, "shuffle"), epoch));
    std::shuffle(order.begin(), order.end(), engine);
    for (std::size_t start = 0; start < n_fit; start += cfg.batch_size) {
      if (cfg.max_steps && out.steps >= cfg.max_steps) break;
      batch.clear();
      for (std::size_t i = start; i < std::min(n_fit, start + cfg.batch_size); ++i) {
        batch.push_back(train_set[order[i]]);
      }
      const auto lg = batch_loss_and_grad(model, batch, sys, cfg.workers,
                                          static_cast<long>(out.steps));
      out.loss_curve.push_back(lg.loss);
      adam.step(params, lg.grad);
      model.set_parameters(params);
      ++out.steps;
    }
    ++out.epochs_run;
    if (validation.empty()) {
      out.best_parameters = params;
      out.best_epoch = epoch;
    } else {
      const double val = -batch_loss(model, validation, sys, cfg.workers);
      out.validation_ee.push_back(val);
      if (val > best_val) {
        best_val = val;
        out.best_parameters = params;
        out.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        out.stopped_early = true;
        break;
      }
    }
    if (cfg.max_steps && out.steps >= cfg.max_steps) break;
  }
  model.set_parameters(out.best_parameters);
  return out;
}

// ---- evaluation ----------------------------------------------------------

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

Histogram make_histogram(const std::vector<double>& values, double width) {
  if (!(width > 0)) throw ConfigError("histogram bin width must be positive");
  Histogram h;
  h.width = width;
  if (values.empty()) return h;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  h.lo = std::floor(*mn / width) * width;
  const auto bins = static_cast<std::size_t>(std::floor((*mx - h.lo) / width)) + 1;
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto i = static_cast<std::size_t>(std::floor((v - h.lo) / width));
    h.counts[std::min(i, bins - 1)]++;
  }
  return h;
}

Evaluation summarize(std::vector<EEBreakdown> per_draw, double bin_width) {
  Evaluation ev;
  ev.per_draw = std::move(per_draw);
  std::vector<double> ee;
  ee.reserve(ev.per_draw.size());
  for (const auto& b : ev.per_draw) ee.push_back(b.ee);
  if (!ee.empty()) {
    double s = 0.0;
    for (double x : ee) s += x;
    ev.mean = s / static_cast<double>(ee.size());
    double v = 0.0;
    for (double x : ee) v += (x - ev.mean) * (x - ev.mean);
    ev.stddev = ee.size() > 1 ? std::sqrt(v / static_cast<double>(ee.size() - 1)) : 0.0;
  }
  ev.histogram = make_histogram(ee, bin_width);
  return ev;
}

Evaluation evaluate(const PrecoderModel& model, const std::vector<ChannelSet>& test_set,
                    const SystemConfig& sys, double bin_width, std::size_t workers) {
  std::vector<EEBreakdown> per(test_set.size());
  const auto pm = sys.power_model();
  parallel_for(
      test_set.size(),
      [&](std::size_t i) {
        per[i] = energy_efficiency(test_set[i], model.precode(test_set[i], sys), pm,
                                   sys.bandwidth);
      },
      workers);
  return summarize(std::move(per), bin_width);
}

}  // namespace leo
