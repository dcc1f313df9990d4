#include <gtest/gtest.h>

#include "leo/errors.hpp"
#include "leo/taylor_unfolded_gnn.hpp"
#include "test_util.hpp"

using namespace leo;
using namespace leo::test;

namespace {

const double kBw = 20e6;

PowerModel pm_for(const ChannelSet& cs) { return {2.0, 0.3, 0.1, 0.2, cs.n_antennas()}; }

double spectral_norm(const CMatrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(to_eigen(m));
  return svd.singularValues()(0);
}

CMatrix residual(const CMatrix& f, const CMatrix& m) {
  auto r = CMatrix::identity(m.rows());
  r -= matmul(f, m);
  return r;
}

// Strictly diagonally dominant Hermitian matrix with positive diagonal.
CMatrix random_sdd(std::size_t n, Engine& eng) {
  auto a = random_matrix(n, n, eng);
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0;
    for (std::size_t j = 0; j < n; ++j) off += j == i ? 0.0 : std::abs(m(i, j));
    m(i, i) = off * 1.2 + 0.5;
  }
  return m;
}

UnfoldedParams random_params(std::size_t layers, Engine& eng, double spread = 0.05) {
  auto p = UnfoldedParams::exact_taylor(layers);
  std::normal_distribution<double> n(0.0, spread);
  auto flat = p.flatten();
  for (auto& x : flat) x += n(eng);
  p.assign(flat);
  return p;
}

double frob_inner(const CMatrix& w, const CMatrix& f) {
  double s = 0;
  for (std::size_t i = 0; i < f.values().size(); ++i)
    s += (std::conj(w.values()[i]) * f.values()[i]).real();
  return s;
}

}  // namespace

TEST(DiagInverse, Identity) {
  EXPECT_EQ(diag_inverse_init(CMatrix::identity(3)), CMatrix::identity(3));
}

TEST(DiagInverse, Diagonal) {
  const CMatrix m{{2, 0}, {0, 4}};
  EXPECT_EQ(diag_inverse_init(m), (CMatrix{{0.5, 0}, {0, 0.25}}));
}

TEST(DiagInverse, ContractionForDiagonallyDominant) {
  auto eng = make_engine(1);
  for (int i = 0; i < 30; ++i) {
    const auto m = random_sdd(8, eng);
    EXPECT_LT(spectral_norm(residual(diag_inverse_init(m), m)), 1.0);
  }
}

TEST(DiagInverse, ZeroDiagonalThrows) {
  EXPECT_THROW(diag_inverse_init(CMatrix{{0, 1}, {1, 2}}), NumericError);
}

TEST(TaylorStep, FixedPointAtInverse) {
  auto eng = make_engine(2);
  const auto p = random_hpd(5, eng);
  const auto inv = from_eigen(to_eigen(p).inverse());
  EXPECT_LE(max_abs_diff(taylor_step_exact(inv, p), inv), 1e-12);
}

TEST(TaylorStep, ScalarRecursion) {
  const auto i2 = CMatrix::identity(2);
  const auto f1 = taylor_step_exact(0.5 * i2, i2);
  EXPECT_EQ(f1, 0.75 * i2);
  EXPECT_EQ(taylor_step_exact(f1, i2), 0.9375 * i2);
}

TEST(TaylorStep, ResidualDecreasesMonotonically) {
  auto eng = make_engine(3);
  for (int t = 0; t < 10; ++t) {
    // I + E with zero-diagonal Hermitian E, ||E||_2 = 0.95: HPD, and the
    // contraction is slow enough to stay above roundoff for all 8 steps
    auto e = random_sdd(8, eng);
    for (std::size_t i = 0; i < 8; ++i) e(i, i) = 0;
    e *= 0.95 / spectral_norm(e);
    const auto p = CMatrix::identity(8) + e;
    auto f = diag_inverse_init(p);
    double prev = frobenius_norm(residual(f, p));
    for (int l = 0; l < 8; ++l) {
      f = taylor_step_exact(f, p);
      const double r = frobenius_norm(residual(f, p));
      EXPECT_LE(r, prev);
      prev = r;
    }
  }
}

TEST(UnfoldForward, ExactTaylorEmbedding) {
  auto eng = make_engine(4);
  for (int t = 0; t < 10; ++t) {
    const auto m = random_sdd(8, eng);
    const auto out = unfold_forward(m, UnfoldedParams::exact_taylor(6));
    auto f = diag_inverse_init(m);
    for (int l = 0; l < 6; ++l) f = taylor_step_exact(f, m);
    EXPECT_LE(max_abs_diff(out.f, f), 1e-12);
  }
}

TEST(UnfoldForward, ZeroParamsGiveZero) {
  auto eng = make_engine(5);
  const auto m = random_sdd(4, eng);
  EXPECT_EQ(unfold_forward(m, UnfoldedParams::zeros(1)).f, CMatrix(4, 4));
}

TEST(UnfoldForward, ScaledIdentityStaysDiagonal) {
  const double alpha = 1.7;
  const auto m = alpha * CMatrix::identity(5);
  const auto f = unfold_forward(m, UnfoldedParams::exact_taylor(4), 0.6).f;
  double x = 0.6 / alpha;
  for (int l = 0; l < 4; ++l) x = 2 * x - alpha * x * x;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      if (i == j) {
        EXPECT_NEAR(f(i, j).real(), x, 1e-15);
      } else {
        EXPECT_EQ(f(i, j), cplx(0));
      }
    }
}

TEST(UnfoldForward, ReplayIsBitExact) {
  auto eng = make_engine(6);
  const auto m = random_sdd(6, eng);
  auto p = random_params(3, eng);
  p.activation.kind = Activation::Kind::leaky_relu;
  const auto out = unfold_forward(m, p, 0.9);
  EXPECT_EQ(unfold_replay(out.tape, p), out.f);
  EXPECT_EQ(unfold_apply(m, p, 0.9), out.f);
}

TEST(UnfoldForward, GramFactorMatchesDense) {
  auto eng = make_engine(16);
  GramFactor fac{random_matrix(8, 3, eng), 0.7};
  auto m = matmul(fac.a, hermitian(fac.a));
  for (std::size_t i = 0; i < 8; ++i) m(i, i) += fac.ridge;
  auto p = random_params(3, eng);
  const double g = safe_init_gain(m);
  const auto dense = unfold_forward(m, p, g);
  const auto fast = unfold_forward(m, p, g, &fac);
  EXPECT_LT(max_abs_diff(dense.f, fast.f), 1e-10 * (1.0 + max_abs_diff(dense.f, CMatrix(8, 8))));
  EXPECT_EQ(unfold_replay(fast.tape, p), fast.f);
  EXPECT_EQ(unfold_apply(m, p, g, &fac), fast.f);
  GramFactor bad{random_matrix(5, 3, eng), 0.7};
  EXPECT_THROW(unfold_forward(m, p, g, &bad), ShapeError);
}

TEST(UnfoldForward, NonFiniteIsNumericError) {
  const auto m = CMatrix::identity(2);
  auto p = UnfoldedParams::zeros(2);
  p.layers[0].c0 = p.layers[1].c0 = 1e300;
  EXPECT_THROW(unfold_forward(m, p), NumericError);
}

TEST(UnfoldBackward, ZeroOutputGradient) {
  auto eng = make_engine(7);
  const auto m = random_sdd(4, eng);
  const auto p = random_params(2, eng);
  const auto out = unfold_forward(m, p);
  for (double g : unfold_backward(out.tape, p, CMatrix(4, 4))) EXPECT_EQ(g, 0.0);
}

TEST(UnfoldBackward, FiniteDifference) {
  auto eng = make_engine(8);
  for (auto kind : {Activation::Kind::identity, Activation::Kind::leaky_relu}) {
    const auto m = random_sdd(4, eng);
    auto p = random_params(2, eng, 0.2);
    p.activation.kind = kind;
    const auto w = random_matrix(4, 4, eng);
    const auto out = unfold_forward(m, p, 0.8);
    const auto g = unfold_backward(out.tape, p, w);
    const auto base = p.flatten();
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double h = 1e-5;
      auto up = base, dn = base;
      up[i] += h;
      dn[i] -= h;
      auto pu = p, pd = p;
      pu.assign(up);
      pd.assign(dn);
      const double fd = (frob_inner(w, unfold_apply(m, pu, 0.8)) -
                         frob_inner(w, unfold_apply(m, pd, 0.8))) / (2 * h);
      EXPECT_LE(std::abs(g[i] - fd), 1e-4 * std::max(std::abs(fd), 1e-3)) << "param " << i;
    }
  }
}

TEST(UnfoldBackward, NeighborParamsInertForSingleAntenna) {
  const CMatrix m{{cplx(2.5)}};
  auto eng = make_engine(9);
  const auto p = random_params(3, eng, 0.3);
  const auto out = unfold_forward(m, p, 0.5);
  const auto g = unfold_backward(out.tape, p, CMatrix{{cplx(1.3, -0.4)}});
  for (std::size_t l = 0; l < 3; ++l) {
    for (std::size_t k = 2; k < kParamsPerLayer; ++k) EXPECT_EQ(g[l * kParamsPerLayer + k], 0.0);
    EXPECT_NE(g[l * kParamsPerLayer], 0.0);
  }
}

TEST(UnfoldedBUpdate, ExactTaylorApproachesExactUpdate) {
  const auto cs = make_cs(2, 4, 3, 10);
  const auto pm = pm_for(cs);
  const auto b0 = initial_precoder(cs, 10.0);
  const auto u = update_u(cs, b0);
  const auto w = update_w(cs, b0, u);
  const auto upd = unfolded_b_update(cs, u, w, 0.0, pm, kBw, 10.0, UnfoldedParams::exact_taylor(30));
  const auto inv = from_eigen(to_eigen(upd.m).inverse());
  EXPECT_LE(max_abs_diff(upd.unfold.f, inv), 1e-9 * frobenius_norm(inv));
  EXPECT_LE(transmit_power(upd.b), 10.0 * (1 + 1e-12));
}

TEST(PrecodeUnfolded, ExactTaylorNearDinkelbach) {
  for (Seed s = 0; s < 10; ++s) {
    const auto cs = make_cs(2, 4, 3, 20 + s);
    const auto pm = pm_for(cs);
    const auto ref = dinkelbach_solve(cs, pm, kBw, 10.0);
    const auto r = precode_unfolded(cs, pm, kBw, 10.0, UnfoldedParams::exact_taylor(12));
    EXPECT_GE(r.ee, 0.98 * ref.ee) << "seed " << s;
    EXPECT_LE(transmit_power(r.b), 10.0 * (1 + 1e-9));
  }
}

TEST(PrecodeUnfolded, AntennaPermutationEquivariance) {
  auto eng = make_engine(11);
  const auto p = random_params(4, eng, 0.05);
  for (int t = 0; t < 5; ++t) {
    const auto cs = make_cs(2, 4, 3, 40 + t);
    const auto pm = pm_for(cs);
    const auto perm = random_permutation(8, eng);
    const auto b = precode_unfolded(cs, pm, kBw, 10.0, p).b;
    const auto bp = precode_unfolded(permute_antennas(cs, perm), pm, kBw, 10.0, p).b;
    EXPECT_LE(max_abs_diff(bp, permute_rows(b, perm)), 1e-6);
  }
}

TEST(UnfoldedJson, RoundTrip) {
  auto eng = make_engine(12);
  auto p = random_params(5, eng);
  p.activation.kind = Activation::Kind::leaky_relu;
  p.activation.slope = 0.02;
  const auto back = unfolded_from_json(Json::parse(unfolded_to_json(p).dump()));
  EXPECT_EQ(back, p);
  Json bad = unfolded_to_json(p);
  bad["arch"] = "other";
  EXPECT_THROW(unfolded_from_json(bad), IoError);
  Json summed = unfolded_to_json(p);
  summed["neighbor_aggregation"] = "sum";
  EXPECT_THROW(unfolded_from_json(summed), IoError);
}
