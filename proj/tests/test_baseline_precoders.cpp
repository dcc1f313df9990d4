#include <gtest/gtest.h>

#include "leo/baseline_precoders.hpp"
#include "leo/errors.hpp"
#include "test_util.hpp"

using namespace leo;
using namespace leo::test;

TEST(Baselines, SingleUserCollapsesToMf) {
  auto eng = make_engine(1);
  const auto h = random_matrix(6, 1, eng);
  const double p = 7.0;
  const auto want = std::sqrt(p) / frobenius_norm(h) * h;
  for (auto kind : {BaselineKind::mf, BaselineKind::rzf, BaselineKind::mmse}) {
    const auto b = precode_baseline(h, {kind, 0.5}, p, 1.0);
    EXPECT_LE(max_abs_diff(b, want), 1e-12) << to_string(kind);
  }
}

TEST(Baselines, OrthogonalChannelGivesOrthogonalRzf) {
  // columns of a unitary DFT-like matrix scaled differently
  CMatrix h(4, 2);
  for (std::size_t n = 0; n < 4; ++n) {
    h(n, 0) = 1.0;
    h(n, 1) = 2.0 * std::polar(1.0, std::numbers::pi / 2 * n);
  }
  const auto b = precode_baseline(h, {BaselineKind::rzf, 1.0}, 10.0, 1.0);
  EXPECT_LE(std::abs(dot(b.col(0), b.col(1))), 1e-12);
  // zero leakage: h_j^H b_k = 0 for j != k
  EXPECT_LE(std::abs(dot(h.col(1), b.col(0))), 1e-12);
  EXPECT_LE(std::abs(dot(h.col(0), b.col(1))), 1e-12);
}

TEST(Baselines, RzfMatchesDirectFormula) {
  auto eng = make_engine(2);
  const auto h = random_matrix(4, 2, eng);
  const auto b = precode_baseline(h, {BaselineKind::rzf, 1.0}, 10.0, 1.0);
  const Eigen::MatrixXcd eh = to_eigen(h);
  Eigen::MatrixXcd gram = eh.adjoint() * eh + Eigen::MatrixXcd::Identity(2, 2);
  Eigen::MatrixXcd eb = eh * gram.inverse();
  eb *= std::sqrt(10.0) / eb.norm();
  EXPECT_LE(max_abs_diff(b, from_eigen(eb)), 1e-10);
}

TEST(Baselines, MmseRegularizationFromNoise) {
  auto eng = make_engine(3);
  const auto h = random_matrix(4, 3, eng);
  const double n0 = 0.4, p = 6.0;
  const auto mmse = precode_baseline(h, {BaselineKind::mmse, 123.0}, p, n0);
  const auto rzf = precode_baseline(h, {BaselineKind::rzf, 3 * n0 / p}, p, n0);
  EXPECT_LE(max_abs_diff(mmse, rzf), 1e-12);
}

TEST(Baselines, OutputsExactlyAtBudget) {
  auto eng = make_engine(4);
  for (int i = 0; i < 20; ++i) {
    const auto h = random_matrix(8, 3, eng);
    for (auto kind : {BaselineKind::mf, BaselineKind::rzf, BaselineKind::mmse}) {
      const auto b = precode_baseline(h, {kind, 0.1}, 10.0, 1.0);
      EXPECT_LE(transmit_power(b), 10.0);
      EXPECT_NEAR(transmit_power(b), 10.0, 1e-12);
    }
  }
}

TEST(Baselines, RzfTendsToMfForLargeRegularization) {
  auto eng = make_engine(5);
  const auto h = random_matrix(8, 3, eng);
  const auto mf = precode_baseline(h, {BaselineKind::mf, 1.0}, 1.0, 1.0);
  double prev = 0.0;
  for (double a : {1.0, 1e2, 1e4, 1e6}) {
    const auto rzf = precode_baseline(h, {BaselineKind::rzf, a}, 1.0, 1.0);
    double c = 0;
    for (std::size_t i = 0; i < mf.values().size(); ++i)
      c += (std::conj(mf.values()[i]) * rzf.values()[i]).real();
    EXPECT_GE(c, prev - 1e-12);
    prev = c;
  }
  EXPECT_GT(prev, 1 - 1e-8);
}

TEST(Baselines, BadRegularizationAndNamesRejected) {
  auto eng = make_engine(6);
  const auto h = random_matrix(4, 2, eng);
  EXPECT_THROW(precode_baseline(h, {BaselineKind::rzf, 0.0}, 1.0, 1.0), ContractError);
  EXPECT_THROW(baseline_kind_from_string("zf"), ConfigError);
  EXPECT_EQ(baseline_kind_from_string("mmse"), BaselineKind::mmse);
}

TEST(Baselines, EvaluationIsDeterministicAndBounded) {
  const auto cs = make_cs(4, 4, 4, 7);
  const PowerModel pm{2, .3, .1, .2, 16};
  const auto a = evaluate_baseline(cs, {BaselineKind::rzf, 0.01}, pm, 20e6, 10.0, 50, 3);
  const auto b = evaluate_baseline(cs, {BaselineKind::rzf, 0.01}, pm, 20e6, 10.0, 50, 3);
  EXPECT_EQ(a.ee_mc, b.ee_mc);
  EXPECT_GT(a.ee_mc, 0.0);
  EXPECT_NEAR(a.power, pm.xi * 10.0 + pm.static_power(), 1e-9);
}

TEST(Baselines, MismatchedDesignUsesTruthForScoring) {
  const auto cs = make_cs(4, 4, 4, 8);
  const PowerModel pm{2, .3, .1, .2, 16};
  const auto same = evaluate_baseline(cs, cs, {BaselineKind::mmse}, pm, 20e6, 10.0, 30, 5);
  const auto ref = evaluate_baseline(cs, {BaselineKind::mmse}, pm, 20e6, 10.0, 30, 5);
  EXPECT_EQ(same.ee_mc, ref.ee_mc);
  const auto bad = evaluate_baseline(cs, perturb_csi(cs, -5.0, 1), {BaselineKind::mmse}, pm,
                                     20e6, 10.0, 30, 5);
  EXPECT_LT(bad.ee_mc, ref.ee_mc);
}
