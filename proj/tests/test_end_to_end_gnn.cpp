#include <gtest/gtest.h>

#include "leo/end_to_end_gnn.hpp"
#include "leo/errors.hpp"
#include "leo/training_engine.hpp"
#include "test_util.hpp"

using namespace leo;
using namespace leo::test;

namespace {

const double kBw = 20e6;

// Sign pattern of every ReLU input; FD is only meaningful where it is stable.
std::vector<bool> relu_pattern(const E2ETape& t) {
  std::vector<bool> s;
  for (const auto& l : t.layers)
    for (const auto* v : {&l.h1, &l.h2, &l.h3})
      for (double x : *v) s.push_back(x > 0);
  return s;
}

E2EModel small_model(std::size_t layers, Seed seed, Aggregation agg = Aggregation::sum) {
  E2EConfig cfg;
  cfg.n_layers = layers;
  cfg.edge_width = 6;
  cfg.mlp_hidden = 8;
  cfg.aggregation = agg;
  return E2EModel::initialize(cfg, seed);
}

}  // namespace

TEST(E2EFeatures, LayoutAndScaling) {
  auto cs = make_cs(2, 2, 3, 1);
  cs.users[1].gamma = 4.0;
  const auto f = e2e_features(cs);
  ASSERT_EQ(f.width, 2u);
  ASSERT_EQ(f.n_edges(), 12u);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t k = 0; k < 3; ++k) {
      const cplx want = std::sqrt(cs.users[k].gamma) * cs.users[k].v[n];
      EXPECT_EQ(f.values[(n * 3 + k) * 2], want.real());
      EXPECT_EQ(f.values[(n * 3 + k) * 2 + 1], want.imag());
    }
}

TEST(E2EModel, DefaultShapes) {
  const auto m = E2EModel::initialize({}, 1);
  EXPECT_EQ(m.layer_in(0), 2u);
  EXPECT_EQ(m.layer_out(m.config().n_layers - 1), 2u);
  EXPECT_EQ(m.mlp(0, 0).first.out, 64u);
}

TEST(E2EForward, ZeroInputZeroBiasGivesZero) {
  auto model = small_model(2, 2);  // biases start at zero
  auto cs = make_cs(2, 2, 2, 3);
  for (auto& u : cs.users) u.v = CVector(4);
  E2ETape tape;
  const auto b = e2e_forward(model, cs, 10.0, &tape);
  EXPECT_EQ(tape.b_raw, CMatrix(4, 2));
  EXPECT_EQ(b, CMatrix(4, 2));
}

TEST(E2EForward, PermutationEquivariance) {
  auto eng = make_engine(4);
  for (auto agg : {Aggregation::sum, Aggregation::mean}) {
    const auto model = small_model(3, 5, agg);
    for (int t = 0; t < 5; ++t) {
      const auto cs = make_cs(2, 4, 3, 10 + t);
      const auto b = e2e_forward(model, cs, 10.0);
      const auto pa = random_permutation(8, eng);
      const auto pu = random_permutation(3, eng);
      EXPECT_LE(max_abs_diff(e2e_forward(model, permute_antennas(cs, pa), 10.0),
                             permute_rows(b, pa)), 1e-6);
      EXPECT_LE(max_abs_diff(e2e_forward(model, permute_users(cs, pu), 10.0),
                             permute_cols(b, pu)), 1e-6);
    }
  }
}

TEST(E2EForward, AlwaysFeasible) {
  for (Seed s = 0; s < 20; ++s) {
    const auto model = E2EModel::initialize({}, s);
    const auto cs = make_cs(4, 4, 4, 100 + s);
    EXPECT_LE(transmit_power(e2e_forward(model, cs, 10.0)), 10.0 * (1 + 1e-9));
  }
}

TEST(E2EForward, MacCountLinearInEdges) {
  const auto model = E2EModel::initialize({}, 1);
  std::size_t m1 = 0, m2 = 0;
  (void)e2e_forward(model, e2e_features(make_cs(4, 4, 4, 1)), 10.0, nullptr, &m1);
  (void)e2e_forward(model, e2e_features(make_cs(8, 8, 4, 1)), 10.0, nullptr, &m2);
  EXPECT_EQ(m2, 4 * m1);
}

TEST(E2EBackward, ZeroGradient) {
  const auto model = small_model(2, 6);
  const auto cs = make_cs(2, 2, 2, 7);
  E2ETape tape;
  (void)e2e_forward(model, cs, 10.0, &tape);
  for (double g : e2e_backward(model, tape, CMatrix(4, 2))) EXPECT_EQ(g, 0.0);
}

// Every weight against central differences of the EE, in both projection
// branches (p_max tiny forces rescaling; p_max huge leaves the output alone).
TEST(E2EBackward, FiniteDifferenceAllWeights) {
  for (double p_max : {1e-3, 1e6}) {
    auto model = small_model(1, 8);
    auto eng = make_engine(9);
    std::normal_distribution<double> nb(0.0, 0.1);
    for (auto& x : model.parameters()) x += nb(eng);  // nonzero biases too
    const auto cs = make_cs(2, 2, 2, 11);  // noise fixed; only the budget moves
    SystemConfig sys;
    sys.geometry = cs.geometry;
    sys.n_users = 2;
    sys.p_max = p_max;
    E2ETape tape;
    const auto b = e2e_forward(model, cs, p_max, &tape);
    const bool scaled = transmit_power(tape.b_raw) > p_max;
    EXPECT_EQ(scaled, p_max < 1.0);
    const auto eg = energy_efficiency_grad(cs, b, sys.power_model(), kBw);
    const auto g = e2e_backward(model, tape, eg.grad);
    const auto pattern = relu_pattern(tape);
    std::size_t checked = 0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < model.size(); ++i) {
      auto up = model, dn = model;
      up.parameters()[i] += h;
      dn.parameters()[i] -= h;
      E2ETape tu, td;
      const auto bu = e2e_forward(up, cs, p_max, &tu);
      const auto bd = e2e_forward(dn, cs, p_max, &td);
      if (relu_pattern(tu) != pattern || relu_pattern(td) != pattern) continue;
      const double fd = (energy_efficiency(cs, bu, sys.power_model(), kBw).ee -
                         energy_efficiency(cs, bd, sys.power_model(), kBw).ee) / (2 * h);
      const double scale = std::max(std::abs(fd), 1e-6 * std::abs(eg.ee));
      EXPECT_LE(std::abs(g[i] - fd), 1e-4 * scale) << "param " << i << " p_max " << p_max;
      ++checked;
    }
    EXPECT_GE(checked, model.size() * 9 / 10);
  }
}

TEST(E2EJson, RoundTrip) {
  const auto m = small_model(2, 12, Aggregation::mean);
  const auto back = e2e_from_json(Json::parse(e2e_to_json(m).dump()));
  EXPECT_EQ(back.config(), m.config());
  EXPECT_EQ(back.parameters(), m.parameters());
  Json bad = e2e_to_json(m);
  bad["parameters"] = Json::array();
  EXPECT_THROW(e2e_from_json(bad), IoError);
}

TEST(E2EInit, DeterministicInSeed) {
  EXPECT_EQ(E2EModel::initialize({}, 3).parameters(), E2EModel::initialize({}, 3).parameters());
  EXPECT_NE(E2EModel::initialize({}, 3).parameters(), E2EModel::initialize({}, 4).parameters());
}
