// leo_cli: data generation, training, evaluation and experiment sweeps.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "leo/errors.hpp"
#include "leo/experiment.hpp"
#include "leo/parallel.hpp"

namespace fs = std::filesystem;
using namespace leo;

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::vector<std::string> sets;
  std::string output_dir;
  long long seed = -1;
  long long n_seeds = -1;
  std::size_t workers = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON experiment config");
  cmd->add_option("--preset", c.preset, "named preset (desk|table1)");
  cmd->add_option("--set", c.sets, "override, e.g. system.p_max=5 (value parsed as JSON)");
  cmd->add_option("-o,--output-dir", c.output_dir, "output directory (default $LEO_OUTPUT_DIR)");
  cmd->add_option("--seed", c.seed, "base seed");
  cmd->add_option("--n-seeds", c.n_seeds, "number of channel seeds");
  cmd->add_option("-j,--workers", c.workers, "worker threads (0 = all cores)");
}

// Turns "a.b=v" into {"a":{"b":v}}; v is JSON when it parses, else a string.
Json override_patch(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value: " + kv);
  const std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  std::string ptr = "/";
  for (char ch : key) ptr += ch == '.' ? '/' : ch;
  Json patch;
  patch[Json::json_pointer(ptr)] = value;
  return patch;
}

ExperimentSpec load_spec(const Common& c) {
  Json j = c.config.empty() ? Json::object() : read_json_file(c.config);
  if (!c.preset.empty()) j["preset"] = c.preset;
  for (const auto& kv : c.sets) j.merge_patch(override_patch(kv));
  if (c.seed >= 0) j["seed"] = c.seed;
  if (c.n_seeds >= 0) j["n_seeds"] = c.n_seeds;
  ExperimentSpec spec = j.get<ExperimentSpec>();
  spec.train.workers = c.workers;
  // checkpoint paths are relative to the config file
  if (!c.config.empty()) {
    const auto base = fs::path(c.config).parent_path();
    for (auto& [m, p] : spec.checkpoints) {
      if (fs::path(p).is_relative() && !fs::exists(p)) p = (base / p).string();
    }
  }
  return spec;
}

fs::path output_dir(const Common& c) {
  fs::path dir = c.output_dir;
  if (dir.empty()) {
    const char* env = std::getenv("LEO_OUTPUT_DIR");
    dir = env && *env ? env : "leo_out";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

// Appends to a JSONL record store, creating the header when absent.
void append_records(const fs::path& path, const std::vector<ResultRecord>& fresh) {
  std::vector<ResultRecord> all;
  if (fs::exists(path)) all = import_records(path.string());
  all.insert(all.end(), fresh.begin(), fresh.end());
  export_records(all, path.string(), ExportFormat::jsonl);
}

std::set<RecordKey> completed(const fs::path& path) {
  std::set<RecordKey> keys;
  if (!fs::exists(path)) return keys;
  for (const auto& r : import_records(path.string())) keys.insert(record_key(r));
  return keys;
}

int report(const std::vector<std::string>& violations) {
  for (const auto& v : violations) std::cerr << "invariant violated: " << v << '\n';
  return violations.empty() ? 0 : 3;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char ch : s) out += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
  return out;
}

// ---- verbs ---------------------------------------------------------------

int cmd_generate(const Common& c, const std::string& split, std::size_t count) {
  const auto spec = load_spec(c);
  const auto& sys = spec.system;
  if (split != "train" && split != "test") throw ConfigError("--split must be train|test");
  if (count == 0) count = split == "train" ? spec.train.train_draws : spec.train.test_draws;
  const auto ds = generate_dataset(sys.geometry, sys.n_users, sys.channel_distribution(),
                                   namespace_seed(spec.train.seed, split), count);
  const auto path = output_dir(c) / (split + ".json");
  save_dataset(path.string(), ds);
  std::cout << "wrote " << ds.draws.size() << " channel sets to " << path.string() << '\n';
  return 0;
}

int cmd_train(const Common& c, const std::string& arch, const std::string& data) {
  const auto spec = load_spec(c);
  const auto& sys = spec.system;
  std::unique_ptr<PrecoderModel> model;
  if (arch == "unfolded") {
    model = std::make_unique<UnfoldedModel>(spec.unfolded.make(), spec.solver);
  } else if (arch == "e2e") {
    model = std::make_unique<E2EGnnModel>(
        E2EModel::initialize(spec.e2e, namespace_seed(spec.train.seed, "init")));
  } else {
    throw ConfigError("--arch must be unfolded|e2e");
  }
  std::vector<ChannelSet> train_set;
  if (!data.empty()) {
    train_set = load_dataset(data).draws;
  } else {
    train_set = make_split(sys, spec.train.seed, spec.train.train_draws, 0).train;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = train(*model, spec.train, sys, train_set);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto dir = output_dir(c);
  save_checkpoint((dir / (arch + ".json")).string(), *model);
  {
    std::ofstream out(dir / (arch + "_loss.csv"));
    out << "step,loss\n";
    for (std::size_t i = 0; i < res.loss_curve.size(); ++i) {
      out << i << ',' << res.loss_curve[i] << '\n';
    }
    if (!out) throw IoError("cannot write loss curve");
  }
  std::cout << "trained " << arch << ": " << res.steps << " steps, " << res.epochs_run
            << " epochs (best " << res.best_epoch << (res.stopped_early ? ", early stop" : "")
            << ") in " << secs << " s\n";
  if (!res.validation_ee.empty()) {
    std::cout << "validation EE per epoch:";
    for (double v : res.validation_ee) std::cout << ' ' << v;
    std::cout << '\n';
  }
  std::vector<std::string> bad;
  for (double l : res.loss_curve) {
    if (!std::isfinite(l)) bad.push_back("non-finite loss in curve");
  }
  return report(bad);
}

int cmd_evaluate(const Common& c, const std::string& method) {
  const auto spec = load_spec(c);
  ExperimentSpec one = spec;
  one.methods = {method};
  const auto models = load_models(one);
  const auto& sys = spec.system;
  const std::size_t n = spec.train.test_draws;
  const std::string hash = spec_hash(spec);
  std::vector<ResultRecord> recs(n);
  parallel_for(
      n,
      [&](std::size_t i) {
        const auto cs = experiment_channel(sys, spec.train.seed, i);
        const auto t0 = std::chrono::steady_clock::now();
        const auto res = run_method(method, cs, cs, sys, models, spec.solver, spec.mc_draws,
                                    split_seed(namespace_seed(spec.train.seed, "mc"), i));
        auto& r = recs[i];
        r.wall_time_s = std::max(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1e-9);
        r.config_hash = hash;
        r.method = method;
        r.seed = experiment_seed(spec.train.seed, i);
        r.sweep_value = 0.0;
        r.ee = res.ee;
        r.metric = res.metric;
        r.ee_bound = res.ee_bound;
        r.sum_rate = res.sum_rate;
        r.power_used = res.power_used;
        r.total_power = res.total_power;
        r.p_max = sys.p_max;
        r.converged = res.converged;
      },
      c.workers);
  std::vector<double> ee;
  for (const auto& r : recs) ee.push_back(r.ee);
  const auto hist = make_histogram(ee, spec.histogram_bin_width);
  double mean = 0, var = 0;
  for (double v : ee) mean += v / static_cast<double>(n);
  for (double v : ee) var += (v - mean) * (v - mean) / static_cast<double>(n);

  const auto dir = output_dir(c);
  export_records(recs, (dir / ("eval_" + slug(method) + ".jsonl")).string(), ExportFormat::jsonl);
  export_histogram(hist, (dir / ("hist_" + slug(method) + ".csv")).string());
  std::cout << method << ": mean EE " << mean << " bit/J, std " << std::sqrt(var) << " over "
            << n << " draws\n";
  return report(check_records(recs));
}

int cmd_sweep(const Common& c) {
  const auto spec = load_spec(c);
  const auto models = load_models(spec);
  const auto store = output_dir(c) / ("records_" + slug(spec.id) + ".jsonl");
  const auto done = completed(store);
  const auto fresh = run_experiment(spec, models, done, c.workers);
  append_records(store, fresh);
  std::cout << fresh.size() << " new records (" << done.size() << " already present) -> "
            << store.string() << '\n';
  // per-(value, method) means for a quick look
  std::map<std::pair<double, std::string>, std::pair<double, std::size_t>> agg;
  const std::string hash = spec_hash(spec);
  for (const auto& r : import_records(store.string())) {
    if (r.config_hash != hash) continue;
    auto& a = agg[{r.sweep_value, r.method}];
    a.first += r.ee;
    a.second += 1;
  }
  std::cout << spec.sweep.variable << ",method,mean_ee,n\n";
  for (const auto& [k, v] : agg) {
    std::cout << k.first << ',' << k.second << ',' << v.first / static_cast<double>(v.second)
              << ',' << v.second << '\n';
  }
  return report(check_records(fresh));
}

int cmd_bench(const Common& c) {
  const auto spec = load_spec(c);
  if (spec.bench.reps < 5) std::cerr << "warning: fewer than 5 reps per point\n";
  const auto models = load_models(spec);
  const auto res =
      timing_benchmark(spec.methods, spec.bench, spec.system, models, spec.solver, spec.seed);
  const auto path = output_dir(c) / ("bench_" + slug(spec.id) + ".csv");
  std::ofstream out(path);
  out << "method,n_antennas,median_s,reps\n";
  for (const auto& p : res.points) {
    out << p.method << ',' << p.n_antennas << ',' << p.median << ',' << p.seconds.size() << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [m, s] : res.slopes) std::cout << m << " log-log slope " << s << '\n';
  std::vector<std::string> bad;
  for (const auto& p : res.points) {
    if (!(p.median > 0)) bad.push_back(p.method + ": non-positive timing");
  }
  return report(bad);
}

int cmd_robustness(const Common& c) {
  const auto spec = load_spec(c);
  const auto models = load_models(spec);
  const auto res = robustness_sweep(spec.methods, spec.error_db_grid, spec, models, c.workers);
  const auto dir = output_dir(c);
  export_records(res.records, (dir / ("robustness_" + slug(spec.id) + ".jsonl")).string(),
                 ExportFormat::jsonl);
  std::ofstream out(dir / ("robustness_" + slug(spec.id) + ".csv"));
  out << "method,error_db,mean_ee,mean_degradation\n";
  for (const auto& p : res.points) {
    out << p.method << ',' << p.error_db << ',' << p.mean_ee << ',' << p.mean_degradation << '\n';
    std::cout << p.method << " @ " << p.error_db << " dB: EE " << p.mean_ee
              << ", relative loss " << p.mean_degradation << '\n';
  }
  return report(check_records(res.records));
}

int cmd_export(const std::string& in, const std::string& out, const std::string& format) {
  const auto recs = import_records(in);
  export_records(recs, out, export_format_from_string(format));
  std::cout << "exported " << recs.size() << " records to " << out << '\n';
  return report(check_records(recs));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-efficient precoding experiments for massive-MIMO LEO downlinks"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("generate-data", "draw and save a channel dataset");
  add_common(gen, common);
  std::string split = "train";
  std::size_t count = 0;
  gen->add_option("--split", split, "train|test");
  gen->add_option("-n,--count", count, "number of draws (default from config)");

  auto* tr = app.add_subcommand("train", "train a learned precoder and write its checkpoint");
  add_common(tr, common);
  std::string arch = "unfolded", data;
  tr->add_option("--arch", arch, "unfolded|e2e");
  tr->add_option("--data", data, "dataset file (default: draw from config)");

  auto* ev = app.add_subcommand("evaluate", "EE distribution of one method on the test draws");
  add_common(ev, common);
  std::string method = "wmmse";
  ev->add_option("-m,--method", method, "wmmse|unfolded|e2e|rzf|mmse|mf");

  auto* sw = app.add_subcommand("sweep", "run the configured sweep (resumable)");
  add_common(sw, common);
  auto* be = app.add_subcommand("bench", "per-call timing versus antenna count");
  add_common(be, common);
  auto* ro = app.add_subcommand("robustness", "EE under imperfect statistical CSI");
  add_common(ro, common);

  auto* ex = app.add_subcommand("export", "convert a record file");
  std::string in_path, out_path, format = "csv";
  ex->add_option("-i,--input", in_path, "records (csv or jsonl)")->required();
  ex->add_option("--out", out_path, "destination")->required();
  ex->add_option("-f,--format", format, "csv|jsonl");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_generate(common, split, count);
    if (*tr) return cmd_train(common, arch, data);
    if (*ev) return cmd_evaluate(common, method);
    if (*sw) return cmd_sweep(common);
    if (*be) return cmd_bench(common);
    if (*ro) return cmd_robustness(common);
    if (*ex) return cmd_export(in_path, out_path, format);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
