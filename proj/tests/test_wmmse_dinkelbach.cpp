#include <gtest/gtest.h>

#include <numbers>

#include "leo/baseline_precoders.hpp"
#include "leo/errors.hpp"
#include "leo/wmmse_dinkelbach.hpp"
#include "test_util.hpp"

using namespace leo;
using namespace leo::test;

namespace {

const double kBw = 20e6;

PowerModel pm_for(const ChannelSet& cs) { return {2.0, 0.3, 0.1, 0.2, cs.n_antennas()}; }

CMatrix random_feasible(const ChannelSet& cs, Engine& eng, double power) {
  auto b = random_matrix(cs.n_antennas(), cs.n_users(), eng);
  b *= std::sqrt(power) / frobenius_norm(b);
  return b;
}

// Golden-section maximization of a unimodal function on [lo, hi].
template <class F>
double golden_max(F f, double lo, double hi, int iters = 200) {
  const double r = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi, c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc > fd) {
      b = d, d = c, fd = fc, c = b - r * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd, d = a + r * (b - a), fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Ridge-regularized closed form evaluated with an independent solver.
CMatrix oracle_b(const ChannelSet& cs, const std::vector<cplx>& u, const std::vector<double>& w,
                 double mu) {
  const std::size_t n = cs.n_antennas(), K = cs.n_users();
  Eigen::MatrixXcd g = mu * Eigen::MatrixXcd::Identity(n, n);
  for (std::size_t k = 0; k < K; ++k) {
    const auto v = to_eigen(cs.users[k].v);
    g += w[k] * std::norm(u[k]) * cs.users[k].gamma * v * v.adjoint();
  }
  Eigen::MatrixXcd b(n, K);
  for (std::size_t k = 0; k < K; ++k) {
    const cplx coef = w[k] * std::sqrt(cs.users[k].gamma) * std::conj(u[k]);
    b.col(k) = coef * g.ldlt().solve(to_eigen(cs.users[k].v));
  }
  return from_eigen(b);
}

}  // namespace

TEST(UpdateU, ZeroPrecoder) {
  const auto cs = make_cs(2, 2, 3, 1);
  for (auto u : update_u(cs, CMatrix(4, 3))) EXPECT_EQ(u, cplx(0));
}

TEST(UpdateU, SingleUserScalar) {
  const auto cs = make_cs(2, 2, 1, 1);
  const double p = 4.0;
  CMatrix b(4, 1);
  for (std::size_t n = 0; n < 4; ++n) b(n, 0) = std::sqrt(p) * cs.users[0].v[n];
  EXPECT_LE(std::abs(update_u(cs, b)[0] - std::sqrt(p) / (p + cs.n0)), 1e-14);
}

TEST(UpdateU, ScalarOracle) {
  auto cs = make_cs(2, 2, 3, 2);
  cs.users[2].gamma = 0.6;
  auto eng = make_engine(1);
  const auto b = random_feasible(cs, eng, 5.0);
  const auto u = update_u(cs, b);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& v = cs.users[k].v;
    double total = cs.n0;
    cplx own = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      cplx s = 0;
      for (std::size_t n = 0; n < 4; ++n) s += std::conj(v[n]) * b(n, j);
      total += cs.users[k].gamma * std::norm(s);
      if (j == k) own = std::sqrt(cs.users[k].gamma) * s;
    }
    EXPECT_LE(std::abs(u[k] - std::conj(own) / total), 1e-12 * std::abs(u[k]));
  }
}

TEST(UpdateW, ZeroPrecoderGivesUnitWeights) {
  const auto cs = make_cs(2, 2, 3, 1);
  const CMatrix b(4, 3);
  const auto u = update_u(cs, b);
  for (double e : mse(cs, b, u)) EXPECT_EQ(e, 1.0);
  for (double w : update_w(cs, b, u)) EXPECT_EQ(w, 1.0);
}

TEST(UpdateW, MmseIdentity) {
  const auto cs = make_cs(2, 2, 3, 3);
  auto eng = make_engine(2);
  const auto b = random_feasible(cs, eng, 6.0);
  const auto u = update_u(cs, b);
  const auto e = mse(cs, b, u);
  for (std::size_t k = 0; k < 3; ++k) {
    cplx s = 0;
    for (std::size_t n = 0; n < 4; ++n) s += std::conj(cs.users[k].v[n]) * b(n, k);
    const cplx ident = 1.0 - u[k] * std::sqrt(cs.users[k].gamma) * s;
    EXPECT_LE(std::abs(e[k] - ident), 1e-10);
    // and the rate link: e = 1 / (1 + SINR)
    EXPECT_LE(std::abs(e[k] - 1.0 / (1.0 + sinr_upper(cs, b, k))), 1e-12);
  }
}

TEST(UpdateW, ScalarOracleAtArbitraryU) {
  const auto cs = make_cs(2, 2, 2, 4);
  auto eng = make_engine(3);
  const auto b = random_feasible(cs, eng, 6.0);
  const std::vector<cplx> u{cplx(0.3, -0.2), cplx(-0.1, 0.4)};
  const auto w = update_w(cs, b, u);
  for (std::size_t k = 0; k < 2; ++k) {
    double interf = cs.n0;
    cplx own = 0;
    for (std::size_t j = 0; j < 2; ++j) {
      cplx s = 0;
      for (std::size_t n = 0; n < 4; ++n) s += std::conj(cs.users[k].v[n]) * b(n, j);
      interf += cs.users[k].gamma * std::norm(s);
      if (j == k) own = std::sqrt(cs.users[k].gamma) * s;
    }
    const double e = std::norm(u[k]) * interf - 2 * (u[k] * own).real() + 1.0;
    EXPECT_LE(rel_err(w[k], 1.0 / e), 1e-12);
  }
}

TEST(UpdateB, SingleUserFollowsDirection) {
  const auto cs = make_cs(4, 4, 1, 5);
  const auto pm = pm_for(cs);
  const auto b0 = initial_precoder(cs, 10.0);
  const auto u = update_u(cs, b0);
  const auto w = update_w(cs, b0, u);
  const auto b = update_b(cs, u, w, 1e5, pm, kBw, 10.0);
  const double cosine = std::abs(dot(cs.users[0].v, b.col(0))) / norm(b.col(0));
  EXPECT_GE(cosine, 1 - 1e-10);
}

TEST(UpdateB, SlackMultiplierIsZero) {
  const auto cs = make_cs(2, 2, 2, 6);
  const auto pm = pm_for(cs);
  auto eng = make_engine(4);
  const auto b0 = random_feasible(cs, eng, 1.0);
  const auto u = update_u(cs, b0);
  const auto w = update_w(cs, b0, u);
  BUpdateInfo info;
  // a very high price on power makes the unconstrained optimum tiny
  const auto b = update_b(cs, u, w, 1e9, pm, kBw, 10.0, &info);
  EXPECT_LT(transmit_power(b), 10.0);
  EXPECT_EQ(info.multiplier, 0.0);
}

TEST(UpdateB, MatchesGridSearchOverMultiplier) {
  const auto cs = make_cs(2, 2, 2, 7);
  const auto pm = pm_for(cs);
  auto eng = make_engine(5);
  const auto b0 = random_feasible(cs, eng, 2.0);
  const auto u = update_u(cs, b0);
  const auto w = update_w(cs, b0, u);
  const double rho = 0.0, p_max = 1.0, c = kBw / std::numbers::ln2;
  BUpdateInfo info;
  const auto b = update_b(cs, u, w, rho, pm, kBw, p_max, &info);
  ASSERT_GT(info.multiplier, 0.0);  // constraint active

  // grid on a over [0, a_hi], then refine the bracketing cell by bisection
  auto power_at = [&](double a) { return transmit_power(oracle_b(cs, u, w, (rho * pm.xi + a) / c)); };
  double a_hi = 1.0;
  while (power_at(a_hi) > p_max) a_hi *= 2;
  const int grid = 10000;
  double lo = 0, hi = a_hi;
  for (int i = 1; i <= grid; ++i) {
    const double a = a_hi * i / grid;
    if (power_at(a) <= p_max) {
      lo = a_hi * (i - 1) / grid;
      hi = a;
      break;
    }
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (power_at(mid) > p_max ? lo : hi) = mid;
  }
  const auto want = oracle_b(cs, u, w, (rho * pm.xi + hi) / c);
  EXPECT_NEAR(transmit_power(b), transmit_power(want), 1e-6);
  EXPECT_LE(max_abs_diff(b, want), 1e-6);
  EXPECT_LE(rel_err(info.multiplier, hi), 1e-6);
}

TEST(Wmmse, InfeasibleStartRejected) {
  const auto cs = make_cs(2, 2, 2, 8);
  auto eng = make_engine(6);
  EXPECT_THROW(wmmse_solve(cs, 0.0, random_feasible(cs, eng, 20.0), pm_for(cs), kBw, 10.0),
               ContractError);
}

TEST(Wmmse, FixedPointExitsInOneIteration) {
  const auto cs = make_cs(4, 4, 4, 9);
  const auto pm = pm_for(cs);
  const auto first = wmmse_solve(cs, 1e6, initial_precoder(cs, 10.0), pm, kBw, 10.0,
                                 {1e-12, 5000});
  ASSERT_TRUE(first.converged);
  const auto again = wmmse_solve(cs, 1e6, first.b, pm, kBw, 10.0, {1e-5, 500});
  EXPECT_EQ(again.iterations, 1u);
}

TEST(Wmmse, ObjectiveMonotone) {
  for (Seed s = 0; s < 20; ++s) {
    const auto cs = make_cs(4, 4, 4, 200 + s);
    const auto pm = pm_for(cs);
    for (double rho : {0.0, 1e6, 3e6}) {
      const auto r = wmmse_solve(cs, rho, initial_precoder(cs, 10.0), pm, kBw, 10.0);
      for (std::size_t i = 1; i < r.trace.size(); ++i) {
        EXPECT_GE(r.trace[i].objective / kBw, r.trace[i - 1].objective / kBw - 1e-9)
            << "seed " << s << " rho " << rho << " step " << i;
      }
    }
  }
}

TEST(Wmmse, ScalarProblemMatchesGrid) {
  const auto cs = make_cs(1, 1, 1, 10);
  const PowerModel pm{2.0, 0.3, 0.1, 0.2, 1};
  const double g = cs.users[0].gamma, n0 = cs.n0;
  for (double rho : {0.0, 2e6, 6e6}) {
    auto f = [&](double p) { return std::log2(1 + g * p / n0) - rho / kBw * (pm.xi * p + pm.static_power()); };
    double best = -1e300;
    for (int i = 0; i <= 100000; ++i) best = std::max(best, f(10.0 * i / 100000));
    best = std::max(best, f(golden_max(f, 0.0, 10.0)));
    const auto r = wmmse_solve(cs, rho, initial_precoder(cs, 10.0), pm, kBw, 10.0,
                               {1e-12, 10000});
    EXPECT_LE(std::abs(r.trace.back().objective / kBw - best), 1e-6) << rho;
  }
}

TEST(Dinkelbach, RhoNonDecreasingAndFToZero) {
  for (Seed s = 0; s < 20; ++s) {
    const auto cs = make_cs(4, 4, 4, 300 + s);
    const auto r = dinkelbach_solve(cs, pm_for(cs), kBw, 10.0);
    ASSERT_TRUE(r.converged) << s;
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      EXPECT_GE(r.trace[i].rho, r.trace[i - 1].rho * (1 - 1e-12));
    }
    EXPECT_LE(std::abs(r.trace.back().f_value), 1e-5);
    EXPECT_LE(r.trace.size(), 101u);
    EXPECT_LE(transmit_power(r.b), 10.0 * (1 + 1e-9));
  }
}

TEST(Dinkelbach, ScalarMatchesGoldenSection) {
  for (Seed s = 0; s < 5; ++s) {
    const auto cs = make_cs(1, 1, 1, 400 + s);
    const PowerModel pm{2.0, 0.3, 0.1, 0.2, 1};
    auto ee = [&](double p) {
      return kBw * std::log2(1 + cs.users[0].gamma * p / cs.n0) / (pm.xi * p + pm.static_power());
    };
    const double p_star = golden_max(ee, 0.0, 10.0);
    const auto r = dinkelbach_solve(cs, pm, kBw, 10.0);
    EXPECT_LE(rel_err(r.ee, ee(p_star)), 1e-6);
  }
}

TEST(Dinkelbach, BeatsBaselinesOnTheBound) {
  for (Seed s = 0; s < 100; ++s) {
    const auto cs = make_cs(4, 4, 4, 500 + s);
    const auto pm = pm_for(cs);
    const auto r = dinkelbach_solve(cs, pm, kBw, 10.0);
    const auto h = effective_channel(cs);
    for (auto kind : {BaselineKind::mf, BaselineKind::rzf, BaselineKind::mmse}) {
      const auto b = precode_baseline(h, {kind, 0.01}, 10.0, cs.n0);
      EXPECT_GE(r.ee, energy_efficiency(cs, b, pm, kBw).ee * (1 - 1e-9))
          << "seed " << s << " " << to_string(kind);
    }
  }
}

TEST(Dinkelbach, FinalStateReproducesB) {
  const auto cs = make_cs(4, 4, 4, 11);
  const auto pm = pm_for(cs);
  const auto r = dinkelbach_solve(cs, pm, kBw, 10.0);
  const auto b = update_b(cs, r.last_u, r.last_w, r.last_rho, pm, kBw, 10.0);
  EXPECT_LE(max_abs_diff(b, r.b), 1e-12);
  EXPECT_EQ(r.ee, energy_efficiency(cs, r.b, pm, kBw).ee);
}
