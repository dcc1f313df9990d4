#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "leo/channel_model.hpp"
#include "leo/end_to_end_gnn.hpp"
#include "leo/json_io.hpp"
#include "leo/system_model.hpp"
#include "leo/taylor_unfolded_gnn.hpp"
#include "leo/wmmse_dinkelbach.hpp"

namespace leo {

/// A trainable precoder: channel set in, power-feasible precoder out.
class PrecoderModel {
 public:
  virtual ~PrecoderModel() = default;

  virtual std::string arch() const = 0;
  virtual std::vector<double> parameters() const = 0;
  virtual void set_parameters(const std::vector<double>& values) = 0;

  virtual PrecodingMatrix precode(const ChannelSet& cs, const SystemConfig& sys) const = 0;

  /// EE of the model's output; when `grad` is given it receives dEE/dparams.
  virtual double ee_and_grad(const ChannelSet& cs, const SystemConfig& sys,
                             std::vector<double>* grad) const = 0;

  virtual Json to_json() const = 0;
  virtual std::unique_ptr<PrecoderModel> clone() const = 0;
};

/// Dinkelbach/WMMSE loop with the unfolded network as the b-update. Gradients
/// flow through the final b-update only; u, w and M are held constant.
class UnfoldedModel final : public PrecoderModel {
 public:
  explicit UnfoldedModel(UnfoldedParams params, DinkelbachOptions opts = {});

  std::string arch() const override { return "taylor_unfolded"; }
  std::vector<double> parameters() const override { return params_.flatten(); }
  void set_parameters(const std::vector<double>& values) override { params_.assign(values); }
  PrecodingMatrix precode(const ChannelSet& cs, const SystemConfig& sys) const override;
  double ee_and_grad(const ChannelSet& cs, const SystemConfig& sys,
                     std::vector<double>* grad) const override;
  Json to_json() const override;
  std::unique_ptr<PrecoderModel> clone() const override;

  const UnfoldedParams& params() const noexcept { return params_; }
  const DinkelbachOptions& options() const noexcept { return opts_; }

 private:
  UnfoldedParams params_;
  DinkelbachOptions opts_;
};

class E2EGnnModel final : public PrecoderModel {
 public:
  explicit E2EGnnModel(E2EModel model);

  std::string arch() const override { return "end_to_end"; }
  std::vector<double> parameters() const override { return model_.parameters(); }
  void set_parameters(const std::vector<double>& values) override;
  PrecodingMatrix precode(const ChannelSet& cs, const SystemConfig& sys) const override;
  double ee_and_grad(const ChannelSet& cs, const SystemConfig& sys,
                     std::vector<double>* grad) const override;
  Json to_json() const override;
  std::unique_ptr<PrecoderModel> clone() const override;

  const E2EModel& model() const noexcept { return model_; }

 private:
  E2EModel model_;
};

/// Loads either architecture from its checkpoint JSON.
std::unique_ptr<PrecoderModel> model_from_json(const Json& j);
void save_checkpoint(const std::string& path, const PrecoderModel& model);
std::unique_ptr<PrecoderModel> load_checkpoint(const std::string& path);

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  /// One descent step on `params` along `grad` (gradient of the loss).
  void step(std::vector<double>& params, const std::vector<double>& grad);

  std::size_t steps() const noexcept { return t_; }
  const std::vector<double>& first_moment() const noexcept { return m_; }
  const std::vector<double>& second_moment() const noexcept { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 64;
  std::size_t train_draws = 10000;
  std::size_t test_draws = 1000;
  std::size_t epochs = 20;
  std::size_t patience = 5;            // epochs without validation gain
  double validation_fraction = 0.1;    // tail of the training draws
  std::size_t max_steps = 0;           // 0: no cap
  Seed seed = 1;
  std::size_t workers = 0;             // 0: hardware concurrency
};

/// Train draws from namespace "train", test draws from namespace "test".
struct DataSplit {
  std::vector<ChannelSet> train;
  std::vector<ChannelSet> test;
};
DataSplit make_split(const SystemConfig& sys, Seed seed, std::size_t n_train,
                     std::size_t n_test);

/// -(1/D) sum_d EE_d.
double batch_loss(const PrecoderModel& model, const std::vector<ChannelSet>& batch,
                  const SystemConfig& sys, std::size_t workers = 0);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};
/// Loss and gradient; per-instance results are reduced in batch order.
LossAndGrad batch_loss_and_grad(const PrecoderModel& model,
                                const std::vector<ChannelSet>& batch, const SystemConfig& sys,
                                std::size_t workers = 0, long step = -1);

struct TrainResult {
  std::vector<double> loss_curve;           // one entry per optimizer step
  std::vector<double> validation_ee;        // one entry per epoch
  std::vector<double> best_parameters;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  std::size_t epochs_run = 0;
  bool stopped_early = false;
};

/// Adam over shuffled mini-batches. The model ends holding the parameters of
/// the best validation epoch (the last epoch when there is no validation tail).
/// Throws TrainingError on a non-finite loss.
TrainResult train(PrecoderModel& model, const TrainConfig& cfg, const SystemConfig& sys,
                  const std::vector<ChannelSet>& train_set);

struct Histogram {
  double lo = 0.0;
  double width = 1.0;
  std::vector<std::size_t> counts;

  std::size_t total() const;
};

/// Fixed-width bins starting at floor(min / width) * width.
Histogram make_histogram(const std::vector<double>& values, double width);

struct Evaluation {
  std::vector<EEBreakdown> per_draw;
  double mean = 0.0;
  double stddev = 0.0;
  Histogram histogram;
};

Evaluation summarize(std::vector<EEBreakdown> per_draw, double bin_width);

Evaluation evaluate(const PrecoderModel& model, const std::vector<ChannelSet>& test_set,
                    const SystemConfig& sys, double bin_width = 1e5, std::size_t workers = 0);

}  // namespace leo
