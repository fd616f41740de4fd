#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oscchain/error.hpp"
#include "oscchain/estimators.hpp"

using namespace oscchain;

namespace {

EnsembleSpec small_spec(int n, double horizon, std::size_t replicas) {
  EnsembleSpec spec;
  spec.potential = PotentialSpec::harmonic();
  spec.cfg.n = n;
  spec.cfg.dt_micro = 0.02;
  spec.replicas = replicas;
  spec.horizon = horizon;
  spec.seed = 5;
  return spec;
}

// Box sized for a gaussian of width w moving with the sound frame, with the profile centered.
TestFunction place(EnsembleSpec& spec, double w) {
  auto phi = TestFunction::gaussian(0.0, w);
  const double v = spec.cfg.sound_velocity(spec.potential.coeffs().c2);
  spec.cfg.lattice_len = lattice_for(spec.cfg.n, phi.support_radius() + 0.5, v, spec.horizon);
  return phi.centered_at(box_center(spec.cfg));
}

double riemann_deriv_norm2(const TestFunction& phi, int n, std::size_t len) {
  double acc = 0.0;
  for (std::size_t j = 0; j < len; ++j) {
    const double d = phi.derivative(1, static_cast<double>(j) / n);
    acc += d * d;
  }
  return acc / n;
}

}  // namespace

TEST(Summaries, MomentsAndErrors) {
  std::vector<double> x = {1.0, -2.0, 3.0, -4.0};
  auto m = summarize("m", x, 1.0);
  EXPECT_DOUBLE_EQ(m.value, -0.5);
  EXPECT_NEAR(m.variance, (1.5 * 1.5 + 1.5 * 1.5 + 3.5 * 3.5 + 3.5 * 3.5) / 3.0 / 4.0, 1e-14);
  EXPECT_DOUBLE_EQ(second_moment("s", x, 1.0).value, 7.5);
  EXPECT_DOUBLE_EQ(abs_moment("a", x, 1.0).value, 2.5);
  EXPECT_GE(m.variance, 0.0);
}

TEST(Summaries, TrendVerdict) {
  auto e = [](double v, double se) {
    TimeIntegralEstimate t;
    t.value = v;
    t.variance = se * se;
    return t;
  };
  EXPECT_TRUE(strictly_decreasing_trend({e(3, 0.2), e(2, 0.2), e(1, 0.2)}));
  EXPECT_FALSE(strictly_decreasing_trend({e(3, 0.2), e(3.1, 0.2), e(1, 0.2)}));
  EXPECT_FALSE(strictly_decreasing_trend({e(3, 1.0), e(2, 1.0), e(1.5, 1.0)}));
}

TEST(Runner, DeterministicAcrossWorkerCounts) {
  auto spec = small_spec(8, 0.05, 6);
  auto phi = place(spec, 0.5);
  auto f = qv_integrand(phi, spec.cfg.sound_velocity(1.0), spec.cfg);
  auto a = ensemble_integrals(spec, {f});
  spec.workers = 3;
  auto b = ensemble_integrals(spec, {f});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i][0], b[i][0]);
}

TEST(Runner, ReplicaErrorCarriesLowestIndex) {
  try {
    parallel_replicas(10, 2, [](std::size_t i) -> std::vector<double> {
      if (i == 4 || i == 7) throw NumericError("boom");
      return {1.0};
    });
    FAIL() << "expected ReplicaError";
  } catch (const ReplicaError& e) {
    EXPECT_EQ(e.replica(), 4u);
  }
}

TEST(Runner, ResolutionError) {
  auto spec = small_spec(8, 0.5, 2);
  auto phi = place(spec, 0.5);
  spec.snapshot_micro = 1e6;
  EXPECT_THROW(ensemble_integrals(spec, {qv_integrand(phi, 0.0, spec.cfg)}), ResolutionError);
}

TEST(Runner, CheckpointsArePartialIntegrals) {
  auto spec = small_spec(8, 0.5, 2);
  spec.checkpoints = {0.1, 0.25};
  Integrand clock = [](const ChainState&, double s) { return s; };
  Integrand one = [](const ChainState&, double) { return 1.0; };
  const auto rows = ensemble_integrals(spec, {one, clock});
  ASSERT_EQ(rows[0].size(), 6u);
  const double c1 = checkpoint_time(spec, 0.1), c2 = checkpoint_time(spec, 0.25);
  EXPECT_NEAR(rows[0][0], c1, 1e-12);
  EXPECT_NEAR(rows[0][1], c1 * c1 / 2, 1e-12);
  EXPECT_NEAR(rows[0][2], c2, 1e-12);
  EXPECT_NEAR(rows[0][4], 0.5, 1e-12);
  EXPECT_NEAR(rows[0][5], 0.125, 1e-12);
  spec.checkpoints = {0.6};
  EXPECT_THROW(ensemble_integrals(spec, {one}), DomainError);
}

TEST(Runner, LatticeSizing) {
  const std::size_t len = lattice_for(16, 2.0, 16.0, 0.1);
  EXPECT_EQ(len % 16, 0u);
  EXPECT_GE(static_cast<double>(len), 16 * (4.0 + 3.2));
  ScalingConfig cfg;
  cfg.n = 16;
  cfg.lattice_len = len;
  EXPECT_DOUBLE_EQ(box_center(cfg), len / 32.0);
}

TEST(QuadraticVariation, ZeroWithoutNoise) {
  auto spec = small_spec(8, 0.05, 3);
  spec.cfg.gamma = 0.0;
  auto phi = place(spec, 0.5);
  auto e = qv_estimate(spec, phi, Frame::phonon(1, spec.cfg, spec.potential.coeffs()));
  EXPECT_EQ(e.value, 0.0);
}

TEST(QuadraticVariation, GibbsDensity) {
  // E[(p_j - p_{j+1})^2] = 2/beta, so E[integral] = T (gamma/beta) (1/n) sum phi'^2
  auto spec = small_spec(16, 0.02, 60);
  spec.cfg.beta = 2.0;
  spec.cfg.gamma = 1.5;
  auto phi = place(spec, 0.5);
  const auto frame = Frame::phonon(1, spec.cfg, spec.potential.coeffs());
  auto e = qv_estimate(spec, phi, frame);
  const double expected = spec.horizon * 1.5 / 2.0 * riemann_deriv_norm2(phi, 16, spec.cfg.lattice_len);
  EXPECT_NEAR(riemann_deriv_norm2(phi, 16, spec.cfg.lattice_len), phi.deriv_norm2(), 1e-9);
  EXPECT_NEAR(e.value, expected, 5.0 * e.std_error());
  EXPECT_NEAR(e.value / expected, 1.0, 0.05);
}

TEST(Equipartition, StaticHarmonicMeanIsZero) {
  auto spec = small_spec(16, 0.0, 2);
  auto phi = place(spec, 0.5);
  ScaledPotential pot(spec.potential, spec.cfg.epsilon());
  GibbsMarginal g(pot, 1.0);
  auto eq = equilibrium_data(g, 0.0);
  auto f = equipartition_integrand(phi, 0.0, spec.cfg, 1.0, eq);
  std::vector<double> vals;
  for (int rep = 0; rep < 400; ++rep) {
    RandomStream rng(3, rep);
    vals.push_back(f(sample_gibbs_state(spec.cfg.lattice_len, g, 0.0, rng), 0.0));
  }
  auto m = summarize("static", vals, 0.0);
  EXPECT_NEAR(m.value, 0.0, 4.0 * m.std_error());
}

TEST(Equipartition, FrozenDynamicsIsTimesStatic) {
  auto spec = small_spec(8, 0.3, 2);
  spec.cfg.alpha = 0.0;
  spec.cfg.gamma = 0.0;
  auto phi = place(spec, 0.5);
  ScaledPotential pot(spec.potential, spec.cfg.epsilon());
  GibbsMarginal g(pot, 1.0);
  auto eq = equilibrium_data(g, 0.0);
  auto f = equipartition_integrand(phi, 0.0, spec.cfg, 1.0, eq);
  auto b = bg2_integrand(phi, 0.0, spec.cfg, 2, eq);
  RandomStream rng(4, 0);
  auto state = sample_gibbs_state(spec.cfg.lattice_len, g, 0.0, rng);
  const double fs = f(state, 0.0), bs = b(state, 0.0);
  auto integrals = integrate_trajectory(state, spec, pot, rng, {f, b});
  EXPECT_NEAR(integrals[0], spec.horizon * fs, 1e-12 * (1 + std::abs(fs)));
  EXPECT_NEAR(integrals[1], spec.horizon * bs, 1e-12 * (1 + std::abs(bs)));
}

TEST(BoltzmannGibbs, UnitBlockMatchesDirectFormula) {
  auto spec = small_spec(8, 0.1, 2);
  auto phi = place(spec, 0.5);
  ScaledPotential pot(spec.potential, spec.cfg.epsilon());
  GibbsMarginal g(pot, 1.0, 0.3);
  auto eq = equilibrium_data(g, 0.0);
  RandomStream rng(6, 0);
  auto s = sample_gibbs_state(spec.cfg.lattice_len, g, 0.0, rng);
  const double shift = 0.7;
  const double got = bg2_integrand(phi, 1.0, spec.cfg, 1, eq)(s, shift);
  double direct = 0.0;
  const double mr = eq.means.r;
  for (std::size_t j = 0; j + 1 < s.size(); ++j)
    direct += (s.p[j] * (s.r[j + 1] - mr) - s.p[j] * (s.r[j] - mr)) * phi(j / 8.0 + shift);
  EXPECT_NEAR(got, direct, 1e-12 * (1 + std::abs(direct)));
}

TEST(BoltzmannGibbs, BlockIntegrandMatchesBlockAverage) {
  auto spec = small_spec(8, 0.1, 2);
  auto phi = place(spec, 0.5);
  ScaledPotential pot(spec.potential, spec.cfg.epsilon());
  GibbsMarginal g(pot, 1.0);
  auto eq = equilibrium_data(g, 0.0);
  RandomStream rng(7, 0);
  auto s = sample_gibbs_state(spec.cfg.lattice_len, g, 0.0, rng);
  const std::size_t ell = 4;
  auto pb = block_average(s.p, ell, 0.0);
  auto rb = block_average(s.r, ell, eq.means.r);
  double direct = 0.0;
  for (std::size_t j = 0; j + ell < s.size(); ++j)
    direct += (s.p[j] * (s.r[j + 1] - eq.means.r) - pb[j] * rb[j]) * phi(j / 8.0);
  EXPECT_NEAR(bg2_integrand(phi, 0.0, spec.cfg, ell, eq)(s, 0.0), direct, 1e-11 * (1 + std::abs(direct)));
  EXPECT_THROW(bg2_integrand(phi, 0.0, spec.cfg, spec.cfg.lattice_len, eq), DomainError);
}

TEST(Bracket, DisjointSupportsGiveZero) {
  auto spec = small_spec(8, 0.1, 2);
  spec.cfg.lattice_len = 256;
  ScaledPotential pot(spec.potential, spec.cfg.epsilon());
  GibbsMarginal g(pot, 1.0);
  RandomStream rng(8, 0);
  auto s = sample_gibbs_state(256, g, 0.0, rng);
  auto a = TestFunction::gaussian(6.0, 0.3), b = TestFunction::gaussian(24.0, 0.3);
  EXPECT_EQ(bracket_integrand(1, a, 0.0, -1, b, 0.0, spec.cfg, 1.0)(s, 0.0), 0.0);
}

TEST(Bracket, DiagonalGibbsScale) {
  // harmonic: E[(xi_j - xi_{j+1})^2] = 4/beta, off-diagonal mean zero
  auto spec = small_spec(16, 0.0, 2);
  spec.cfg.lattice_len = 256;
  ScaledPotential pot(spec.potential, spec.cfg.epsilon());
  GibbsMarginal g(pot, 1.0);
  auto phi = TestFunction::gaussian(8.0, 0.5);
  double diag = 0.0, off = 0.0;
  const int reps = 300;
  for (int rep = 0; rep < reps; ++rep) {
    RandomStream rng(9, rep);
    auto s = sample_gibbs_state(256, g, 0.0, rng);
    diag += bracket_integrand(1, phi, 0.0, 1, phi, 0.0, spec.cfg, 1.0)(s, 0.0);
    off += bracket_integrand(1, phi, 0.0, -1, phi, 0.0, spec.cfg, 1.0)(s, 0.0);
  }
  EXPECT_NEAR(diag / reps / (4.0 * phi.deriv_norm2()), 1.0, 0.05);
  EXPECT_NEAR(off / reps, 0.0, 0.05 * 4.0 * phi.deriv_norm2());
}

TEST(WrongFrame, ControlAndCrossRun) {
  auto spec = small_spec(8, 0.1, 4);
  auto phi = place(spec, 0.4);
  const double v = spec.cfg.sound_velocity(1.0);
  for (auto kind : {WrongFrameKind::Linear, WrongFrameKind::Quadratic, WrongFrameKind::Cross}) {
    auto e = wrong_frame_integral(spec, kind, 1, -v, phi);
    EXPECT_GE(e.value, 0.0);
    EXPECT_EQ(e.replicas, 4u);
  }
  EXPECT_THROW(wrong_frame_integral(spec, WrongFrameKind::Linear, 1, -10.0 * v, phi), FrameWrap);
}

TEST(Spacetime, EqualTimeStructure) {
  auto spec = small_spec(8, 0.0, 200);
  spec.cfg.lattice_len = 128;
  spec.cfg.beta = 2.0;
  auto s = spacetime_correlation(spec, 1, {-3, -2, 0, 2, 3}, {0.0});
  ASSERT_EQ(s.mean.size(), 5u);
  EXPECT_NEAR(s.mean[2], 2.0 / 2.0, 4.0 * s.std_error[2]);
  for (int k : {0, 1, 3, 4}) EXPECT_NEAR(s.mean[k], 0.0, 4.0 * s.std_error[k]);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(s.bootstrap_error[k] / s.std_error[k], 1.0, 0.3);
  EXPECT_THROW(spacetime_correlation(spec, 1, {65}, {0.0}), DomainError);
}

TEST(Spacetime, FrameShiftTracksRidge) {
  // noiseless harmonic chain: the recentered correlation stays peaked at lag 0
  auto spec = small_spec(8, 0.0, 40);
  spec.cfg.gamma = 0.0;
  spec.cfg.lattice_len = 256;
  auto s = spacetime_correlation(spec, 1, {-4, 0, 4}, {0.0, 0.2});
  EXPECT_GT(s.mean[4], s.mean[3]);
  EXPECT_GT(s.mean[4], s.mean[5]);
}

TEST(Stationarity, HarmonicMomentsMatchQuadrature) {
  auto spec = small_spec(8, 0.2, 200);
  spec.cfg.lattice_len = 64;
  const auto check = gibbs_stationarity(spec);
  ASSERT_EQ(check.measured.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    const auto& m = check.measured[k];
    EXPECT_LT(std::abs(m.value - check.expected[k]), 4.0 * m.std_error() + 1e-12) << m.label;
  }
}

TEST(Stationarity, StaticHarmonicVariances) {
  auto spec = small_spec(16, 0.0, 400);
  spec.cfg.lattice_len = 128;
  const auto phi = TestFunction::gaussian(4.0, 0.5);
  const auto check = static_field_variances(spec, phi);
  EXPECT_LT(std::abs(check.var_plus.value - 2.0), 4.0 * check.var_plus.std_error());
  EXPECT_LT(std::abs(check.var_minus.value - 2.0), 4.0 * check.var_minus.std_error());
  // harmonic energy variance is 1/beta^2 per site
  const double ref = phi.norm2();
  EXPECT_LT(std::abs(check.energy_pairing.value - ref), 4.0 * check.energy_pairing.std_error());
}
