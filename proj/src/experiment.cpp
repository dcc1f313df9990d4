#include "leo/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "leo/errors.hpp"
#include "leo/parallel.hpp"

namespace leo {

// ---- config JSON ---------------------------------------------------------

void to_json(Json& j, const SystemConfig& s) {
  j = Json{{"nx", s.geometry.nx},
           {"ny", s.geometry.ny},
           {"spacing", s.geometry.spacing},
           {"n_users", s.n_users},
           {"bandwidth", s.bandwidth},
           {"xi", s.xi},
           {"p_rfc", s.p_rfc},
           {"p_lo", s.p_lo},
           {"p_bb", s.p_bb},
           {"p_max", s.p_max},
           {"distribution", s.distribution}};
}

void from_json(const Json& j, SystemConfig& s) {
  s.geometry.nx = j.value("nx", s.geometry.nx);
  s.geometry.ny = j.value("ny", s.geometry.ny);
  s.geometry.spacing = j.value("spacing", s.geometry.spacing);
  s.n_users = j.value("n_users", s.n_users);
  s.bandwidth = j.value("bandwidth", s.bandwidth);
  s.xi = j.value("xi", s.xi);
  s.p_rfc = j.value("p_rfc", s.p_rfc);
  s.p_lo = j.value("p_lo", s.p_lo);
  s.p_bb = j.value("p_bb", s.p_bb);
  s.p_max = j.value("p_max", s.p_max);
  if (j.contains("distribution")) s.distribution = j["distribution"].get<ChannelDistributionSpec>();
  if (s.geometry.nx == 0 || s.geometry.ny == 0 || s.n_users == 0) {
    throw ConfigError("system: nx, ny and n_users must be >= 1");
  }
  if (!(s.p_max > 0) || !(s.bandwidth > 0) || !(s.xi > 0)) {
    throw ConfigError("system: p_max, bandwidth and xi must be positive");
  }
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"learning_rate", c.adam.learning_rate},
           {"beta1", c.adam.beta1},
           {"beta2", c.adam.beta2},
           {"epsilon", c.adam.epsilon},
           {"batch_size", c.batch_size},
           {"train_draws", c.train_draws},
           {"test_draws", c.test_draws},
           {"epochs", c.epochs},
           {"patience", c.patience},
           {"validation_fraction", c.validation_fraction},
           {"max_steps", c.max_steps},
           {"seed", c.seed}};
}

void from_json(const Json& j, TrainConfig& c) {
  c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.epsilon = j.value("epsilon", c.adam.epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.train_draws = j.value("train_draws", c.train_draws);
  c.test_draws = j.value("test_draws", c.test_draws);
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  if (c.batch_size == 0 || c.train_draws == 0 || c.test_draws == 0 || c.epochs == 0) {
    throw ConfigError("train: counts must be >= 1");
  }
}

void to_json(Json& j, const DinkelbachOptions& o) {
  j = Json{{"eps1", o.eps1}, {"eps2", o.eps2}, {"max_outer", o.max_outer},
           {"max_inner", o.max_inner}};
}

void from_json(const Json& j, DinkelbachOptions& o) {
  o.eps1 = j.value("eps1", o.eps1);
  o.eps2 = j.value("eps2", o.eps2);
  o.max_outer = j.value("max_outer", o.max_outer);
  o.max_inner = j.value("max_inner", o.max_inner);
}

void to_json(Json& j, const E2EConfig& c) {
  j = Json{{"n_layers", c.n_layers},
           {"edge_width", c.edge_width},
           {"mlp_hidden", c.mlp_hidden},
           {"aggregation", c.aggregation == Aggregation::sum ? "sum" : "mean"}};
}

void from_json(const Json& j, E2EConfig& c) {
  c.n_layers = j.value("n_layers", c.n_layers);
  c.edge_width = j.value("edge_width", c.edge_width);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  const auto agg = j.value("aggregation", std::string("sum"));
  if (agg == "sum") {
    c.aggregation = Aggregation::sum;
  } else if (agg == "mean") {
    c.aggregation = Aggregation::mean;
  } else {
    throw ConfigError("e2e: unknown aggregation '" + agg + "'");
  }
}

UnfoldedParams UnfoldedSetup::make() const {
  auto p = warm_start ? UnfoldedParams::exact_taylor(n_layers) : UnfoldedParams::zeros(n_layers);
  p.activation = activation;
  return p;
}

void to_json(Json& j, const UnfoldedSetup& u) {
  j = Json{{"n_layers", u.n_layers},
           {"activation",
            u.activation.kind == Activation::Kind::identity ? "identity" : "leaky_relu"},
           {"slope", u.activation.slope},
           {"init", u.warm_start ? "taylor" : "zero"}};
}

void from_json(const Json& j, UnfoldedSetup& u) {
  u.n_layers = j.value("n_layers", u.n_layers);
  if (u.n_layers == 0) throw ConfigError("unfolded: n_layers must be >= 1");
  const auto act = j.value("activation", std::string("identity"));
  if (act == "identity") {
    u.activation.kind = Activation::Kind::identity;
  } else if (act == "leaky_relu") {
    u.activation.kind = Activation::Kind::leaky_relu;
  } else {
    throw ConfigError("unfolded: unknown activation '" + act + "'");
  }
  u.activation.slope = j.value("slope", u.activation.slope);
  const auto init = j.value("init", std::string("taylor"));
  if (init != "taylor" && init != "zero") throw ConfigError("unfolded: init must be taylor|zero");
  u.warm_start = init == "taylor";
}

void to_json(Json& j, const ExperimentSpec& s) {
  Json sweep_values = Json::array();
  for (double v : s.sweep.values) sweep_values.push_back(real_to_json(v));
  Json errors = Json::array();
  for (double v : s.error_db_grid) errors.push_back(real_to_json(v));
  j = Json{{"id", s.id},
           {"methods", s.methods},
           {"sweep", Json{{"variable", s.sweep.variable}, {"values", sweep_values}}},
           {"system", s.system},
           {"seed", s.seed},
           {"n_seeds", s.n_seeds},
           {"mc_draws", s.mc_draws},
           {"solver", s.solver},
           {"train", s.train},
           {"unfolded", s.unfolded},
           {"e2e", s.e2e},
           {"checkpoints", s.checkpoints},
           {"bench", Json{{"nt_grid", s.bench.nt_grid},
                          {"n_users", s.bench.n_users},
                          {"reps", s.bench.reps}}},
           {"robustness", Json{{"error_db", errors}}},
           {"histogram_bin_width", s.histogram_bin_width}};
}

void from_json(const Json& j, ExperimentSpec& s) {
  if (j.contains("preset")) s = preset(j["preset"].get<std::string>());
  s.id = j.value("id", s.id);
  if (j.contains("methods")) s.methods = j["methods"].get<std::vector<std::string>>();
  if (j.contains("sweep")) {
    const auto& sw = j["sweep"];
    s.sweep.variable = sw.value("variable", s.sweep.variable);
    if (sw.contains("values")) {
      s.sweep.values.clear();
      for (const auto& v : sw["values"]) s.sweep.values.push_back(real_from_json(v));
    }
  }
  if (j.contains("system")) {
    Json merged = s.system;
    merged.merge_patch(j["system"]);
    s.system = merged.get<SystemConfig>();
  }
  s.seed = j.value("seed", s.seed);
  s.n_seeds = j.value("n_seeds", s.n_seeds);
  s.mc_draws = j.value("mc_draws", s.mc_draws);
  if (j.contains("solver")) s.solver = j["solver"].get<DinkelbachOptions>();
  if (j.contains("train")) {
    Json merged = s.train;
    merged.merge_patch(j["train"]);
    s.train = merged.get<TrainConfig>();
  }
  if (j.contains("unfolded")) s.unfolded = j["unfolded"].get<UnfoldedSetup>();
  if (j.contains("e2e")) s.e2e = j["e2e"].get<E2EConfig>();
  if (j.contains("checkpoints")) {
    s.checkpoints = j["checkpoints"].get<std::map<std::string, std::string>>();
  }
  if (j.contains("bench")) {
    const auto& b = j["bench"];
    if (b.contains("nt_grid")) s.bench.nt_grid = b["nt_grid"].get<std::vector<std::size_t>>();
    s.bench.n_users = b.value("n_users", s.bench.n_users);
    s.bench.reps = b.value("reps", s.bench.reps);
  }
  if (j.contains("robustness") && j["robustness"].contains("error_db")) {
    s.error_db_grid.clear();
    for (const auto& v : j["robustness"]["error_db"]) s.error_db_grid.push_back(real_from_json(v));
  }
  s.histogram_bin_width = j.value("histogram_bin_width", s.histogram_bin_width);
  if (s.methods.empty()) throw ConfigError("experiment: method list is empty");
  if (s.sweep.values.empty()) throw ConfigError("experiment: sweep grid is empty");
  if (s.n_seeds == 0) throw ConfigError("experiment: n_seeds must be >= 1");
}

ExperimentSpec preset(const std::string& name) {
  ExperimentSpec s;
  if (name == "desk") return s;
  if (name == "table1") {
    s.id = "table1";
    s.system.geometry = {8, 8, 0.5};
    s.system.n_users = 10;
    s.train.batch_size = 64;
    s.train.train_draws = 10000;
    s.train.test_draws = 1000;
    return s;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

std::string config_hash(const Json& j) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string spec_hash(const ExperimentSpec& spec) {
  Json j = spec;
  for (const char* key : {"id", "methods", "checkpoints", "bench", "robustness",
                          "histogram_bin_width", "n_seeds"}) {
    j.erase(key);
  }
  j["sweep"].erase("values");
  return config_hash(j);
}

// ---- records -------------------------------------------------------------

const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols{
      "config_hash", "method",      "seed",        "sweep_value", "ee",
      "metric",      "ee_bound",    "sum_rate",    "power_used",  "total_power",
      "p_max",       "wall_time_s", "converged"};
  return cols;
}

RecordKey record_key(const ResultRecord& r) {
  return {r.config_hash, r.method, r.seed, r.sweep_value};
}

SystemConfig apply_sweep(const SystemConfig& base, const std::string& variable, double value) {
  SystemConfig s = base;
  if (variable == "none" || variable == "csi_error_db") return s;
  if (variable == "p_max") {
    if (!(value > 0)) throw ConfigError("sweep p_max must be positive");
    s.p_max = value;
  } else if (variable == "n_users") {
    if (value < 1 || value != std::floor(value)) throw ConfigError("sweep n_users must be >= 1");
    s.n_users = static_cast<std::size_t>(value);
  } else if (variable == "n_antennas") {
    if (value < 1 || value != std::floor(value)) throw ConfigError("sweep n_antennas must be >= 1");
    // most nearly square nx x ny factorization, nx <= ny
    const auto n = static_cast<std::size_t>(value);
    std::size_t nx = static_cast<std::size_t>(std::sqrt(value));
    while (n % nx) --nx;
    s.geometry.nx = nx;
    s.geometry.ny = n / nx;
  } else if (variable == "snr_db") {
    s.distribution.snr_db = value;
  } else if (variable == "xi") {
    s.xi = value;
  } else {
    throw ConfigError("unknown sweep variable '" + variable + "'");
  }
  return s;
}

Seed experiment_seed(Seed base, std::size_t seed_index) {
  return split_seed(namespace_seed(base, "test"), seed_index);
}

ChannelSet experiment_channel(const SystemConfig& sys, Seed seed, std::size_t seed_index) {
  return draw_channel_set(sys.geometry, sys.n_users, experiment_seed(seed, seed_index),
                          sys.channel_distribution());
}

namespace {

bool is_learned(const std::string& m) { return m == "unfolded" || m == "e2e"; }
bool is_baseline(const std::string& m) { return m == "mf" || m == "rzf" || m == "mmse"; }

void check_method(const std::string& m) {
  if (m != "wmmse" && !is_learned(m) && !is_baseline(m)) {
    throw ConfigError("unknown method '" + m + "'");
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  const double s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return std::max(s, 1e-9);
}

Seed csi_seed(Seed base, std::size_t seed_index, std::size_t error_index) {
  return split_seed(split_seed(namespace_seed(base, "csi"), seed_index), error_index);
}

}  // namespace

ModelMap load_models(const ExperimentSpec& spec) {
  ModelMap models;
  std::vector<std::string> missing;
  for (const auto& m : spec.methods) {
    check_method(m);
    if (!is_learned(m)) continue;
    const auto it = spec.checkpoints.find(m);
    if (it == spec.checkpoints.end()) {
      missing.push_back(m + " (no checkpoint configured)");
      continue;
    }
    std::ifstream probe(it->second);
    if (!probe) {
      missing.push_back(m + " (" + it->second + ")");
      continue;
    }
    auto model = load_checkpoint(it->second);
    const std::string want = m == "unfolded" ? "taylor_unfolded" : "end_to_end";
    if (model->arch() != want) {
      throw ConfigError("checkpoint for " + m + " holds a " + model->arch() + " model");
    }
    models[m] = std::shared_ptr<const PrecoderModel>(std::move(model));
  }
  if (!missing.empty()) {
    std::string msg = "missing checkpoint for:";
    for (const auto& m : missing) msg += " " + m;
    throw ConfigError(msg);
  }
  return models;
}

MethodOutcome run_method(const std::string& method, const ChannelSet& design,
                         const ChannelSet& truth, const SystemConfig& sys,
                         const ModelMap& models, const DinkelbachOptions& solver,
                         std::size_t mc_draws, Seed mc_seed) {
  check_method(method);
  const auto pm = sys.power_model();
  MethodOutcome out;
  if (is_baseline(method)) {
    BaselineSpec spec;
    spec.kind = baseline_kind_from_string(method);
    const auto ev = evaluate_baseline(truth, design, spec, pm, sys.bandwidth, sys.p_max,
                                      mc_draws, mc_seed);
    out.ee = ev.ee_mc;
    out.metric = "mc";
    out.ee_bound = ev.ee_bound;
    out.sum_rate = ev.sum_rate;
    out.total_power = ev.power;
    out.power_used = (ev.power - pm.static_power()) / pm.xi;
    return out;
  }
  if (method == "wmmse") {
    auto r = dinkelbach_solve(design, pm, sys.bandwidth, sys.p_max, solver);
    out.b = std::move(r.b);
    out.converged = r.converged;
  } else {
    const auto it = models.find(method);
    if (it == models.end()) throw ConfigError("missing checkpoint for method " + method);
    if (const auto* unf = dynamic_cast<const UnfoldedModel*>(it->second.get())) {
      auto r = precode_unfolded(design, pm, sys.bandwidth, sys.p_max, unf->params(),
                                unf->options());
      out.b = std::move(r.b);
      out.converged = r.converged;
    } else {
      out.b = it->second->precode(design, sys);
    }
  }
  const auto br = energy_efficiency(truth, out.b, pm, sys.bandwidth);
  out.ee = br.ee;
  out.metric = "bound";
  out.ee_bound = br.ee;
  out.sum_rate = br.sum_rate;
  out.total_power = br.total_power;
  out.power_used = transmit_power(out.b);
  return out;
}

std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec, const ModelMap& models,
                                         const std::set<RecordKey>& done, std::size_t workers) {
  for (const auto& m : spec.methods) check_method(m);
  const std::string hash = spec_hash(spec);
  struct Task {
    double value;
    std::size_t value_index;
    std::size_t seed_index;
    std::string method;
  };
  std::vector<Task> tasks;
  for (std::size_t vi = 0; vi < spec.sweep.values.size(); ++vi) {
    for (std::size_t s = 0; s < spec.n_seeds; ++s) {
      for (const auto& m : spec.methods) {
        const RecordKey key{hash, m, experiment_seed(spec.seed, s), spec.sweep.values[vi]};
        if (!done.count(key)) tasks.push_back({spec.sweep.values[vi], vi, s, m});
      }
    }
  }
  std::vector<ResultRecord> out(tasks.size());
  parallel_for(
      tasks.size(),
      [&](std::size_t i) {
        const auto& t = tasks[i];
        const auto sys = apply_sweep(spec.system, spec.sweep.variable, t.value);
        const auto truth = experiment_channel(sys, spec.seed, t.seed_index);
        const auto design = spec.sweep.variable == "csi_error_db"
                                ? perturb_csi(truth, t.value,
                                              csi_seed(spec.seed, t.seed_index, t.value_index))
                                : truth;
        const Seed mc = split_seed(namespace_seed(spec.seed, "mc"), t.seed_index);
        const auto t0 = std::chrono::steady_clock::now();
        const auto res = run_method(t.method, design, truth, sys, models, spec.solver,
                                    spec.mc_draws, mc);
        ResultRecord r;
        r.wall_time_s = seconds_since(t0);
        r.config_hash = hash;
        r.method = t.method;
        r.seed = experiment_seed(spec.seed, t.seed_index);
        r.sweep_value = t.value;
        r.ee = res.ee;
        r.metric = res.metric;
        r.ee_bound = res.ee_bound;
        r.sum_rate = res.sum_rate;
        r.power_used = res.power_used;
        r.total_power = res.total_power;
        r.p_max = sys.p_max;
        r.converged = res.converged;
        out[i] = std::move(r);
      },
      workers);
  return out;
}

// ---- timing --------------------------------------------------------------

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("loglog_slope: need >= 2 points");
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

TimingResult timing_benchmark(const std::vector<std::string>& methods, const BenchSpec& bench,
                              const SystemConfig& base, const ModelMap& models,
                              const DinkelbachOptions& solver, Seed seed) {
  if (bench.reps < 1) throw ConfigError("bench: reps must be >= 1");
  TimingResult out;
  for (const auto& m : methods) check_method(m);
  for (std::size_t nt : bench.nt_grid) {
    auto sys = apply_sweep(base, "n_antennas", static_cast<double>(nt));
    sys.n_users = bench.n_users;
    const auto cs = experiment_channel(sys, seed, 0);
    for (const auto& m : methods) {
      TimingPoint p;
      p.method = m;
      p.n_antennas = nt;
      for (std::size_t r = 0; r < bench.reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        if (is_baseline(m)) {
          BaselineSpec spec;
          spec.kind = baseline_kind_from_string(m);
          const auto draw = draw_fast_fading(cs, FadingSpec{}, split_seed(seed, r));
          (void)precode_baseline(draw.channel_matrix(), spec, sys.p_max, cs.n0);
        } else {
          (void)run_method(m, cs, cs, sys, models, solver, 1, seed);
        }
        p.seconds.push_back(seconds_since(t0));
      }
      p.median = median(p.seconds);
      out.points.push_back(std::move(p));
    }
  }
  for (const auto& m : methods) {
    std::vector<double> x, y;
    for (const auto& p : out.points) {
      if (p.method != m) continue;
      x.push_back(static_cast<double>(p.n_antennas));
      y.push_back(p.median);
    }
    if (x.size() >= 2) out.slopes[m] = loglog_slope(x, y);
  }
  return out;
}

// ---- robustness ----------------------------------------------------------

RobustnessResult robustness_sweep(const std::vector<std::string>& methods,
                                  const std::vector<double>& error_db_grid,
                                  const ExperimentSpec& spec, const ModelMap& models,
                                  std::size_t workers) {
  for (const auto& m : methods) check_method(m);
  const std::string hash = spec_hash(spec);
  const std::size_t S = spec.n_seeds, M = methods.size(), E = error_db_grid.size();
  // ee[s][m][e + 1]; slot 0 is the clean run.
  std::vector<std::vector<std::vector<double>>> ee(
      S, std::vector<std::vector<double>>(M, std::vector<double>(E + 1)));
  std::vector<ResultRecord> recs(S * M * (E + 1));
  parallel_for(
      S,
      [&](std::size_t s) {
        const auto truth = experiment_channel(spec.system, spec.seed, s);
        const Seed mc = split_seed(namespace_seed(spec.seed, "mc"), s);
        for (std::size_t e = 0; e <= E; ++e) {
          const double err = e == 0 ? kNoCsiError : error_db_grid[e - 1];
          const auto design = perturb_csi(truth, err, csi_seed(spec.seed, s, e));
          for (std::size_t m = 0; m < M; ++m) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto res = run_method(methods[m], design, truth, spec.system, models,
                                        spec.solver, spec.mc_draws, mc);
            ee[s][m][e] = res.ee;
            ResultRecord r;
            r.wall_time_s = seconds_since(t0);
            r.config_hash = hash;
            r.method = methods[m];
            r.seed = experiment_seed(spec.seed, s);
            r.sweep_value = err;
            r.ee = res.ee;
            r.metric = res.metric;
            r.ee_bound = res.ee_bound;
            r.sum_rate = res.sum_rate;
            r.power_used = res.power_used;
            r.total_power = res.total_power;
            r.p_max = spec.system.p_max;
            r.converged = res.converged;
            recs[(s * M + m) * (E + 1) + e] = std::move(r);
          }
        }
      },
      workers);
  RobustnessResult out;
  out.methods = methods;
  out.records = std::move(recs);
  for (std::size_t m = 0; m < M; ++m) {
    double clean = 0.0;
    for (std::size_t s = 0; s < S; ++s) clean += ee[s][m][0];
    out.clean_ee_mean.push_back(clean / static_cast<double>(S));
    for (std::size_t e = 0; e < E; ++e) {
      RobustnessPoint p;
      p.method = methods[m];
      p.error_db = error_db_grid[e];
      for (std::size_t s = 0; s < S; ++s) {
        const double c = ee[s][m][0], v = ee[s][m][e + 1];
        p.ee.push_back(v);
        p.degradation.push_back(c > 0 ? (c - v) / c : 0.0);
      }
      for (std::size_t s = 0; s < S; ++s) {
        p.mean_ee += p.ee[s] / static_cast<double>(S);
        p.mean_degradation += p.degradation[s] / static_cast<double>(S);
      }
      out.points.push_back(std::move(p));
    }
  }
  return out;
}

std::pair<double, double> bootstrap_mean_diff_ci(const std::vector<double>& a,
                                                 const std::vector<double>& b, double level,
                                                 std::size_t resamples, Seed seed) {
  if (a.size() != b.size() || a.empty()) throw ContractError("bootstrap: paired samples required");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  auto engine = make_engine(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += d[pick(engine)];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double alpha = 0.5 * (1.0 - level);
  const auto idx = [&](double q) {
    const auto i = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples - 1)));
    return means[std::min(i, resamples - 1)];
  };
  return {idx(alpha), idx(1.0 - alpha)};
}

// ---- export --------------------------------------------------------------

ExportFormat export_format_from_string(const std::string& s) {
  if (s == "csv") return ExportFormat::csv;
  if (s == "jsonl") return ExportFormat::jsonl;
  throw ConfigError("unknown export format '" + s + "' (csv|jsonl)");
}

namespace {

std::string fmt_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw IoError("bad number '" + s + "'");
  return v;
}

Json record_to_json(const ResultRecord& r) {
  return Json{{"config_hash", r.config_hash},
              {"method", r.method},
              {"seed", r.seed},
              {"sweep_value", real_to_json(r.sweep_value)},
              {"ee", r.ee},
              {"metric", r.metric},
              {"ee_bound", r.ee_bound},
              {"sum_rate", r.sum_rate},
              {"power_used", r.power_used},
              {"total_power", r.total_power},
              {"p_max", r.p_max},
              {"wall_time_s", r.wall_time_s},
              {"converged", r.converged}};
}

ResultRecord record_from_json(const Json& j) {
  ResultRecord r;
  r.config_hash = j.at("config_hash").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.seed = j.at("seed").get<Seed>();
  r.sweep_value = real_from_json(j.at("sweep_value"));
  r.ee = j.at("ee").get<double>();
  r.metric = j.at("metric").get<std::string>();
  r.ee_bound = j.at("ee_bound").get<double>();
  r.sum_rate = j.at("sum_rate").get<double>();
  r.power_used = j.at("power_used").get<double>();
  r.total_power = j.at("total_power").get<double>();
  r.p_max = j.at("p_max").get<double>();
  r.wall_time_s = j.at("wall_time_s").get<double>();
  r.converged = j.at("converged").get<bool>();
  return r;
}

std::vector<std::string> record_fields(const ResultRecord& r) {
  return {r.config_hash,           r.method,
          std::to_string(r.seed),  fmt_double(r.sweep_value),
          fmt_double(r.ee),        r.metric,
          fmt_double(r.ee_bound),  fmt_double(r.sum_rate),
          fmt_double(r.power_used), fmt_double(r.total_power),
          fmt_double(r.p_max),     fmt_double(r.wall_time_s),
          r.converged ? "1" : "0"};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void export_records(const std::vector<ResultRecord>& records, const std::string& path,
                    ExportFormat format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  const auto& cols = record_columns();
  if (format == ExportFormat::csv) {
    out << "# schema_version=" << kRecordSchemaVersion << '\n';
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : records) {
      const auto f = record_fields(r);
      for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i];
      out << '\n';
    }
  } else {
    out << Json{{"schema_version", kRecordSchemaVersion}, {"columns", cols}}.dump() << '\n';
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ResultRecord> import_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string first;
  if (!std::getline(in, first)) throw IoError(path + ": empty file");
  std::vector<ResultRecord> out;
  std::string line;
  if (first.rfind("# schema_version=", 0) == 0) {
    if (std::stoi(first.substr(17)) != kRecordSchemaVersion) {
      throw IoError(path + ": unsupported schema version");
    }
    if (!std::getline(in, line) || split_csv(line) != record_columns()) {
      throw IoError(path + ": unexpected CSV header");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv(line);
      if (f.size() != record_columns().size()) throw IoError(path + ": bad row: " + line);
      ResultRecord r;
      r.config_hash = f[0];
      r.method = f[1];
      r.seed = std::stoull(f[2]);
      r.sweep_value = parse_double(f[3]);
      r.ee = parse_double(f[4]);
      r.metric = f[5];
      r.ee_bound = parse_double(f[6]);
      r.sum_rate = parse_double(f[7]);
      r.power_used = parse_double(f[8]);
      r.total_power = parse_double(f[9]);
      r.p_max = parse_double(f[10]);
      r.wall_time_s = parse_double(f[11]);
      r.converged = f[12] == "1";
      out.push_back(std::move(r));
    }
    return out;
  }
  try {
    const Json header = Json::parse(first);
    if (header.value("schema_version", 0) != kRecordSchemaVersion) {
      throw IoError(path + ": unsupported schema version");
    }
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(record_from_json(Json::parse(line)));
    }
  } catch (const Json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return out;
}

void export_histogram(const Histogram& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double lo = h.lo + static_cast<double>(i) * h.width;
    out << fmt_double(lo) << ',' << fmt_double(lo + h.width) << ',' << h.counts[i] << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<std::string> check_records(const std::vector<ResultRecord>& records) {
  std::vector<std::string> bad;
  for (const auto& r : records) {
    const std::string id = r.method + "/seed " + std::to_string(r.seed);
    if (!(r.ee >= 0) || !std::isfinite(r.ee)) bad.push_back(id + ": ee not finite/non-negative");
    if (!(r.wall_time_s > 0)) bad.push_back(id + ": wall_time_s not positive");
    if (r.power_used > r.p_max * (1.0 + 1e-9)) bad.push_back(id + ": power budget exceeded");
  }
  return bad;
}

}  // namespace leo
