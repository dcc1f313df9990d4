#pragma once

#include <cstddef>
#include <vector>

#include "leo/channel_model.hpp"
#include "leo/json_io.hpp"
#include "leo/rng.hpp"
#include "leo/system_model.hpp"

namespace leo {

enum class Aggregation { sum, mean };

struct E2EConfig {
  std::size_t n_layers = 3;
  std::size_t edge_width = 16;  // hidden edge feature size between layers
  std::size_t mlp_hidden = 64;
  Aggregation aggregation = Aggregation::sum;

  bool operator==(const E2EConfig&) const = default;
};

/// Bipartite antenna-user edge features, edge (n, k) at row n * K + k.
struct EdgeFeatures {
  std::size_t n_antennas = 0;
  std::size_t n_users = 0;
  std::size_t width = 0;
  std::vector<double> values;  // (n_antennas * n_users) x width, row-major

  std::size_t n_edges() const noexcept { return n_antennas * n_users; }
};

/// [Re, Im] of sqrt(gamma_k) v_k[n] on every edge.
EdgeFeatures e2e_features(const ChannelSet& cs);

/// Weights of the end-to-end edge network, stored flat for the optimizer.
///
/// Per layer three MLPs (in -> mlp_hidden -> out, ReLU inside):
///   MLP1, MLP2: d_in -> edge_width   (messages along users / antennas)
///   MLP3:       d_in + edge_width -> d_out
/// with d_in = 2 on the first layer and d_out = 2 on the last.
class E2EModel {
 public:
  E2EModel() = default;
  explicit E2EModel(E2EConfig config);

  /// Kaiming-uniform weights from `seed`, zero biases.
  static E2EModel initialize(const E2EConfig& config, Seed seed);

  const E2EConfig& config() const noexcept { return config_; }
  std::vector<double>& parameters() noexcept { return params_; }
  const std::vector<double>& parameters() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }

  std::size_t layer_in(std::size_t layer) const noexcept;
  std::size_t layer_out(std::size_t layer) const noexcept;

  struct DenseRef {
    std::size_t in, out;
    std::size_t weight;  // offset of out x in row-major weights
    std::size_t bias;    // offset of out biases
  };
  struct MlpRef {
    DenseRef first, second;
  };
  /// mlp in {0, 1, 2} for MLP1..MLP3.
  MlpRef mlp(std::size_t layer, std::size_t which) const;

 private:
  E2EConfig config_;
  std::vector<MlpRef> layout_;  // 3 per layer
  std::vector<double> params_;
};

struct E2ELayerTape {
  std::vector<double> a;        // E x d_in
  std::vector<double> h1, m1;   // MLP1 hidden pre-activation, output
  std::vector<double> h2, m2;
  std::vector<double> x3;       // [a, aggregate]
  std::vector<double> h3, y;    // MLP3 hidden pre-activation, output pre-activation
};

struct E2ETape {
  std::size_t n_antennas = 0;
  std::size_t n_users = 0;
  double p_max = 0.0;
  std::vector<E2ELayerTape> layers;
  PrecodingMatrix b_raw;  // before projection
};

/// Runs the network and projects onto the power budget. `macs`, when given,
/// accumulates the multiply-accumulate count of the pass.
PrecodingMatrix e2e_forward(const E2EModel& model, const EdgeFeatures& features, double p_max,
                            E2ETape* tape = nullptr, std::size_t* macs = nullptr);
PrecodingMatrix e2e_forward(const E2EModel& model, const ChannelSet& cs, double p_max,
                            E2ETape* tape = nullptr);

/// dL/dweights given dL/dB at the projected output (g = dL/dRe + i dL/dIm).
std::vector<double> e2e_backward(const E2EModel& model, const E2ETape& tape,
                                 const CMatrix& grad_b);

Json e2e_to_json(const E2EModel& model);
E2EModel e2e_from_json(const Json& j);

}  // namespace leo
