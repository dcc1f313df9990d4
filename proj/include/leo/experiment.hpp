#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "leo/baseline_precoders.hpp"
#include "leo/end_to_end_gnn.hpp"
#include "leo/json_io.hpp"
#include "leo/system_model.hpp"
#include "leo/taylor_unfolded_gnn.hpp"
#include "leo/training_engine.hpp"
#include "leo/wmmse_dinkelbach.hpp"

namespace leo {

void to_json(Json& j, const SystemConfig& s);
void from_json(const Json& j, SystemConfig& s);
void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);
void to_json(Json& j, const DinkelbachOptions& o);
void from_json(const Json& j, DinkelbachOptions& o);
void to_json(Json& j, const E2EConfig& c);
void from_json(const Json& j, E2EConfig& c);

/// How a fresh unfolded model is built before training.
struct UnfoldedSetup {
  std::size_t n_layers = 8;
  Activation activation;
  bool warm_start = true;  // exact Taylor; false: all-zero parameters

  UnfoldedParams make() const;
};
void to_json(Json& j, const UnfoldedSetup& u);
void from_json(const Json& j, UnfoldedSetup& u);

struct SweepSpec {
  std::string variable = "none";  // p_max, n_users, n_antennas, snr_db, xi, csi_error_db
  std::vector<double> values{0.0};
};

struct BenchSpec {
  std::vector<std::size_t> nt_grid{16, 32, 64, 128};
  std::size_t n_users = 4;
  std::size_t reps = 5;
};

/// Declarative description of one experiment; loaded from JSON.
struct ExperimentSpec {
  std::string id = "default";
  std::vector<std::string> methods{"wmmse", "mf"};
  SweepSpec sweep;
  SystemConfig system;
  Seed seed = 1;
  std::size_t n_seeds = 10;
  std::size_t mc_draws = 50;  // fading draws for instantaneous-CSI baselines
  DinkelbachOptions solver;
  TrainConfig train;
  UnfoldedSetup unfolded;
  E2EConfig e2e;
  std::map<std::string, std::string> checkpoints;  // method -> path
  BenchSpec bench;
  std::vector<double> error_db_grid{-30.0, -20.0, -10.0};
  double histogram_bin_width = 1e5;
};
void to_json(Json& j, const ExperimentSpec& s);
void from_json(const Json& j, ExperimentSpec& s);

/// Named presets: "desk" (4x4 array, K = 4) and "table1" (8x8 array, K = 10).
ExperimentSpec preset(const std::string& name);

/// FNV-1a (64-bit) over the canonical dump of `j`, as 16 hex digits.
std::string config_hash(const Json& j);

/// Hash of everything that determines a record except the method list,
/// checkpoints and bench/robustness grids.
std::string spec_hash(const ExperimentSpec& spec);

inline constexpr int kRecordSchemaVersion = 1;

struct ResultRecord {
  std::string config_hash;
  std::string method;
  Seed seed = 0;
  double sweep_value = 0.0;
  double ee = 0.0;        // headline EE (bits/J)
  std::string metric;     // "bound" or "mc"
  double ee_bound = 0.0;  // statistical bound EE
  double sum_rate = 0.0;  // bits/s
  double power_used = 0.0;      // transmit power sum ||b_k||^2 (W)
  double total_power = 0.0;     // consumption (W)
  double p_max = 0.0;           // budget in force for this record
  double wall_time_s = 0.0;
  bool converged = true;

  bool operator==(const ResultRecord&) const = default;
};

/// Column order shared by CSV and JSONL exports.
const std::vector<std::string>& record_columns();

using RecordKey = std::tuple<std::string, std::string, Seed, double>;
RecordKey record_key(const ResultRecord& r);

/// Applies a sweep variable to a copy of the system config.
SystemConfig apply_sweep(const SystemConfig& base, const std::string& variable, double value);

/// Channel used for (sweep point, seed index): namespace "test" of spec.seed.
ChannelSet experiment_channel(const SystemConfig& sys, Seed seed, std::size_t seed_index);
Seed experiment_seed(Seed base, std::size_t seed_index);

/// Loaded learned models, keyed by method name ("unfolded", "e2e").
using ModelMap = std::map<std::string, std::shared_ptr<const PrecoderModel>>;

/// Loads every learned method's checkpoint; ConfigError lists missing ones.
ModelMap load_models(const ExperimentSpec& spec);

struct MethodOutcome {
  PrecodingMatrix b;  // empty for instantaneous-CSI baselines
  double ee = 0.0;
  std::string metric;
  double ee_bound = 0.0;
  double sum_rate = 0.0;
  double power_used = 0.0;
  double total_power = 0.0;
  bool converged = true;
};

/// Designs the precoder on `design` and scores it on `truth`.
MethodOutcome run_method(const std::string& method, const ChannelSet& design,
                         const ChannelSet& truth, const SystemConfig& sys,
                         const ModelMap& models, const DinkelbachOptions& solver,
                         std::size_t mc_draws, Seed mc_seed);

/// Every (sweep value, seed, method) not already in `done`, in that order.
std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec, const ModelMap& models,
                                         const std::set<RecordKey>& done = {},
                                         std::size_t workers = 0);

struct TimingPoint {
  std::string method;
  std::size_t n_antennas = 0;
  std::vector<double> seconds;  // one per rep
  double median = 0.0;
};

struct TimingResult {
  std::vector<TimingPoint> points;
  std::map<std::string, double> slopes;  // d log(time) / d log(N_t)
};

double median(std::vector<double> v);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Wall-clock per precoder call on near-square arrays with N_t in nt_grid. Each
/// rep re-runs the same channel; single-threaded.
TimingResult timing_benchmark(const std::vector<std::string>& methods, const BenchSpec& bench,
                              const SystemConfig& base, const ModelMap& models,
                              const DinkelbachOptions& solver, Seed seed);

struct RobustnessPoint {
  std::string method;
  double error_db = 0.0;
  std::vector<double> ee;           // per seed, scored on the true channel
  std::vector<double> degradation;  // (clean - perturbed) / clean per seed
  double mean_ee = 0.0;
  double mean_degradation = 0.0;
};

struct RobustnessResult {
  std::vector<double> clean_ee_mean;  // per method, aligned with `methods`
  std::vector<std::string> methods;
  std::vector<RobustnessPoint> points;
  std::vector<ResultRecord> records;
};

/// Each method designs on perturb_csi(cs, e) and is scored on cs.
RobustnessResult robustness_sweep(const std::vector<std::string>& methods,
                                  const std::vector<double>& error_db_grid,
                                  const ExperimentSpec& spec, const ModelMap& models,
                                  std::size_t workers = 0);

/// Percentile bootstrap CI of mean(a - b) for paired samples.
std::pair<double, double> bootstrap_mean_diff_ci(const std::vector<double>& a,
                                                 const std::vector<double>& b, double level,
                                                 std::size_t resamples, Seed seed);

enum class ExportFormat { csv, jsonl };
ExportFormat export_format_from_string(const std::string& s);

/// CSV: "# schema_version=N" line, header row, one row per record.
/// JSONL: a header object {"schema_version", "columns"} then one object per record.
void export_records(const std::vector<ResultRecord>& records, const std::string& path,
                    ExportFormat format);
std::vector<ResultRecord> import_records(const std::string& path);

/// bin_lo, bin_hi, count rows.
void export_histogram(const Histogram& h, const std::string& path);

/// Invariant violations over a record set (empty when all pass).
std::vector<std::string> check_records(const std::vector<ResultRecord>& records);

}  // namespace leo
